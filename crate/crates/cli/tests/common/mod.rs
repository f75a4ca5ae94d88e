#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::{Days, NaiveDate};
use nalgebra::DMatrix;
use odest::data::{write_barrier_counts, write_journeys, write_stations, Endpoint, JourneyRecord, Station, TicketClass};
use odest::sim::{sample_counts, Family};
use odest::{ObservationSet, OdMatrix};

pub const WHARFS: [(&str, &str, f64, f64, bool); 6] = [
    ("W1", "Circular Quay", -33.8610, 151.2108, true),
    ("W2", "Garden Island", -33.8610, 151.2290, true),
    ("W3", "Darling Point", -33.8690, 151.2380, true),
    ("W4", "Double Bay", -33.8740, 151.2420, true),
    ("W5", "Rose Bay", -33.8700, 151.2630, true),
    ("W6", "Watsons Bay", -33.8440, 151.2810, true),
];

pub const MEAN: [[f64; 6]; 6] = [
    [0.0, 40.0, 25.0, 30.0, 55.0, 20.0],
    [40.0, 0.0, 10.0, 12.0, 18.0, 6.0],
    [25.0, 10.0, 0.0, 22.0, 15.0, 9.0],
    [30.0, 12.0, 22.0, 0.0, 28.0, 11.0],
    [55.0, 18.0, 15.0, 28.0, 0.0, 24.0],
    [20.0, 6.0, 9.0, 11.0, 24.0, 0.0],
];

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub stations: PathBuf,
    pub journeys: PathBuf,
    pub barriers: PathBuf,
    pub known: PathBuf,
    pub covariates: PathBuf,
}

pub fn ids() -> Vec<String> {
    WHARFS.iter().map(|w| w.0.to_string()).collect()
}

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2012, 2, 1).unwrap()
}

/// Six wharfs, 35 days of barrier counts, a one-in-six home/work survey and
/// a small known casual component.
pub fn sydney_fixture(days: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let stations: Vec<Station> = WHARFS
        .iter()
        .map(|(id, name, lat, lon, b)| Station::new(*id, *name, *lat, *lon, *b).unwrap())
        .collect();
    let mut records = Vec::new();
    let mut k = 0;
    for i in 0..6 {
        for j in 0..6 {
            if i == j {
                continue;
            }
            let count = (MEAN[i][j] / 6.0).round() as usize;
            for c in 0..count {
                let off = 0.0004 * ((c % 3) as f64 - 1.0);
                let origin = Endpoint::Point {
                    lat: stations[i].lat + off,
                    lon: stations[i].lon - off,
                };
                let destination = if c % 2 == 0 {
                    Endpoint::Station(stations[j].id.clone())
                } else {
                    Endpoint::Point {
                        lat: stations[j].lat - off,
                        lon: stations[j].lon + off,
                    }
                };
                records.push(JourneyRecord {
                    record_id: format!("P{k:04}"),
                    date: start(),
                    ticket_class: TicketClass::RegularZone,
                    origin,
                    destination,
                });
                k += 1;
            }
        }
    }
    records.push(JourneyRecord {
        record_id: "P9999".into(),
        date: start(),
        ticket_class: TicketClass::RegularZone,
        origin: Endpoint::Point { lat: -33.8611, lon: 151.2109 },
        destination: Endpoint::Station("W1".into()),
    });
    let known = DMatrix::from_fn(6, 6, |i, j| if i != j && (i == 0 || j == 0) { 1.0 } else { 0.0 });
    let truth = OdMatrix::new(ids(), DMatrix::from_fn(6, 6, |i, j| MEAN[i][j] + known[(i, j)])).unwrap();
    let counts = sample_counts(&truth, Family::Poisson, days, 2012).unwrap();
    let base = counts.observations;
    let labels = (0..days).map(|t| (start() + Days::new(t as u64)).to_string()).collect();
    let obs = ObservationSet::new(ids(), labels, base.departures().clone(), base.arrivals().clone()).unwrap();

    let p = |name: &str| dir.path().join(name);
    write_stations(std::fs::File::create(p("stations.csv")).unwrap(), &stations).unwrap();
    write_journeys(std::fs::File::create(p("journeys.csv")).unwrap(), &records).unwrap();
    write_barrier_counts(std::fs::File::create(p("barriers.csv")).unwrap(), &obs).unwrap();
    OdMatrix::new(ids(), known)
        .unwrap()
        .write_csv(std::fs::File::create(p("known.csv")).unwrap())
        .unwrap();
    let mut cov = String::from("date,weekend\n");
    for t in 0..days {
        let d = start() + Days::new(t as u64);
        cov.push_str(&format!("{d},{}\n", u8::from(t % 7 >= 5)));
    }
    std::fs::write(p("covariates.csv"), cov).unwrap();
    Fixture {
        stations: p("stations.csv"),
        journeys: p("journeys.csv"),
        barriers: p("barriers.csv"),
        known: p("known.csv"),
        covariates: p("covariates.csv"),
        dir,
    }
}

pub fn odest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odest")).args(args).output().expect("odest runs")
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub const MARGINS_HEADER: &str =
    "station_id,expected_departures,expected_arrivals,observed_mean_departures,observed_mean_arrivals";

/// Checks the files every estimation run must produce; returns the matrix.
pub fn check_products(out: &Path, n: usize) -> Result<OdMatrix, String> {
    let rz = std::fs::File::open(out.join("rz_hat.csv")).map_err(|e| format!("rz_hat.csv: {e}"))?;
    let m = OdMatrix::read_csv(rz).map_err(|e| format!("rz_hat.csv: {e}"))?;
    if m.n() != n {
        return Err(format!("rz_hat.csv has {} stations", m.n()));
    }
    let margins = std::fs::read_to_string(out.join("margins.csv")).map_err(|e| format!("margins.csv: {e}"))?;
    let lines: Vec<&str> = margins.lines().collect();
    if lines.first() != Some(&MARGINS_HEADER) || lines.len() != n + 1 {
        return Err(format!("margins.csv malformed: {:?}", lines.first()));
    }
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out.join("report.json")).map_err(|e| format!("report.json: {e}"))?,
    )
    .map_err(|e| format!("report.json: {e}"))?;
    for key in ["method", "lambda_hat", "constraint_violation", "p_Rz_hat", "warnings", "station_ids"] {
        if report.get(key).is_none() {
            return Err(format!("report.json lacks {key}"));
        }
    }
    for f in ["heatmap.svg", "margins.svg"] {
        let svg = std::fs::read_to_string(out.join(f)).map_err(|e| format!("{f}: {e}"))?;
        if !svg.starts_with("<svg") {
            return Err(format!("{f} is not SVG"));
        }
    }
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out.join("manifest.json")).map_err(|e| format!("manifest.json: {e}"))?,
    )
    .map_err(|e| format!("manifest.json: {e}"))?;
    if manifest["outputs"].as_array().map_or(true, |a| a.is_empty()) {
        return Err("manifest lists no outputs".into());
    }
    Ok(m)
}
