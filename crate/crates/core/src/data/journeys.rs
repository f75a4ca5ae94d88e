use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use super::{assign_nearest_station, check_header, open, parse_date, parse_f64, reader, DistanceMetric, Station};
use crate::error::{OdError, Result};
use crate::matrix::{format_sig12, OdMatrix};

pub(crate) const HEADER: [&str; 9] = [
    "record_id",
    "date",
    "ticket_class",
    "origin_station",
    "origin_lat",
    "origin_lon",
    "destination_station",
    "destination_lat",
    "destination_lon",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TicketClass {
    Casual,
    RegularSpecific,
    RegularZone,
}

impl TicketClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            TicketClass::Casual => "casual",
            TicketClass::RegularSpecific => "regular_specific",
            TicketClass::RegularZone => "regular_zone",
        }
    }
}

impl std::str::FromStr for TicketClass {
    type Err = OdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "casual" => Ok(TicketClass::Casual),
            "regular_specific" => Ok(TicketClass::RegularSpecific),
            "regular_zone" => Ok(TicketClass::RegularZone),
            other => Err(OdError::param(
                "ticket_class",
                format!("expected casual|regular_specific|regular_zone, got '{other}'"),
            )),
        }
    }
}

/// A journey end: a known station, or coordinates to be snapped to the
/// nearest station.
#[derive(Debug, Clone, PartialEq)]
pub enum Endpoint {
    Station(String),
    Point { lat: f64, lon: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct JourneyRecord {
    pub record_id: String,
    pub date: NaiveDate,
    pub ticket_class: TicketClass,
    pub origin: Endpoint,
    pub destination: Endpoint,
}

fn endpoint(path: &str, line: usize, side: &str, station: &str, lat: &str, lon: &str) -> Result<Endpoint> {
    if !station.is_empty() {
        return Ok(Endpoint::Station(station.to_string()));
    }
    if lat.is_empty() || lon.is_empty() {
        return Err(OdError::schema(
            path,
            format!("line {line}: {side} needs a station id or both coordinates"),
        ));
    }
    let lat = parse_f64(path, line, &format!("{side}_lat"), lat)?;
    let lon = parse_f64(path, line, &format!("{side}_lon"), lon)?;
    if lat.abs() > 90.0 || lon.abs() > 180.0 {
        return Err(OdError::schema(path, format!("line {line}: {side} coordinates out of range")));
    }
    Ok(Endpoint::Point { lat, lon })
}

pub fn read_journeys<R: Read>(r: R, path: &str) -> Result<Vec<JourneyRecord>> {
    let mut rdr = reader(r);
    check_header(path, rdr.headers()?, &HEADER)?;
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        if rec.len() != HEADER.len() {
            return Err(OdError::schema(path, format!("line {line}: expected 9 fields, got {}", rec.len())));
        }
        let ticket_class = rec[2]
            .parse()
            .map_err(|e: OdError| OdError::schema(path, format!("line {line}: {e}")))?;
        out.push(JourneyRecord {
            record_id: rec[0].to_string(),
            date: parse_date(path, line, &rec[1])?,
            ticket_class,
            origin: endpoint(path, line, "origin", &rec[3], &rec[4], &rec[5])?,
            destination: endpoint(path, line, "destination", &rec[6], &rec[7], &rec[8])?,
        });
    }
    Ok(out)
}

/// `record_id,date,ticket_class,origin_station,origin_lat,origin_lon,
/// destination_station,destination_lat,destination_lon`.
pub fn load_journeys(path: &Path) -> Result<Vec<JourneyRecord>> {
    read_journeys(open(path)?, &path.display().to_string())
}

pub fn write_journeys<W: Write>(w: W, records: &[JourneyRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(HEADER)?;
    let fields = |e: &Endpoint| match e {
        Endpoint::Station(id) => [id.clone(), String::new(), String::new()],
        Endpoint::Point { lat, lon } => [String::new(), format_sig12(*lat), format_sig12(*lon)],
    };
    for r in records {
        let [os, ola, olo] = fields(&r.origin);
        let [ds, dla, dlo] = fields(&r.destination);
        w.write_record([
            r.record_id.clone(),
            r.date.format("%Y-%m-%d").to_string(),
            r.ticket_class.as_str().to_string(),
            os,
            ola,
            olo,
            ds,
            dla,
            dlo,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Survey counts after nearest-station assignment.
#[derive(Debug, Clone)]
pub struct SurveyOd {
    /// Raw tallies, origin rows by destination columns, in station-file order.
    pub matrix: OdMatrix,
    /// Journeys whose two ends resolve to the same station.
    pub dropped_same_station: usize,
    pub counted: usize,
}

/// Tallies journeys per (origin, destination) station pair.
pub fn build_survey_od(records: &[JourneyRecord], stations: &[Station], metric: DistanceMetric) -> Result<SurveyOd> {
    if stations.is_empty() {
        return Err(OdError::EmptyNetwork);
    }
    if records.is_empty() {
        return Err(OdError::param("journeys", "at least one journey record is required"));
    }
    let index: HashMap<&str, usize> = stations.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    let resolve = |rec: &JourneyRecord, e: &Endpoint| -> Result<usize> {
        let id = match e {
            Endpoint::Station(id) => id.as_str(),
            Endpoint::Point { lat, lon } => assign_nearest_station(*lat, *lon, stations, metric)?,
        };
        index.get(id).copied().ok_or_else(|| {
            OdError::DataInconsistency(format!("record {} refers to unknown station '{id}'", rec.record_id))
        })
    };
    let n = stations.len();
    let mut m = DMatrix::zeros(n, n);
    let mut dropped = 0;
    for rec in records {
        let o = resolve(rec, &rec.origin)?;
        let d = resolve(rec, &rec.destination)?;
        if o == d {
            dropped += 1;
        } else {
            m[(o, d)] += 1.0;
        }
    }
    Ok(SurveyOd {
        matrix: OdMatrix::new(stations.iter().map(|s| s.id.clone()).collect(), m)?,
        dropped_same_station: dropped,
        counted: records.len() - dropped,
    })
}
