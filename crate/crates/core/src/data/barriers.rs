use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use super::{check_header, open, parse_date, parse_f64, reader};
use crate::error::{OdError, Result};
use crate::matrix::format_sig12;
use crate::observation::ObservationSet;

pub(crate) const HEADER: [&str; 4] = ["date", "station_id", "departures", "arrivals"];

/// Daily network total of departures minus arrivals, when nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct DayImbalance {
    pub date: NaiveDate,
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct BarrierCounts {
    pub observations: ObservationSet,
    pub dates: Vec<NaiveDate>,
    pub imbalances: Vec<DayImbalance>,
}

/// Reads `date,station_id,departures,arrivals`. Days are sorted by date;
/// stations follow `station_order` when given, otherwise first appearance.
/// Every station must have a row on every day.
pub fn read_barrier_counts<R: Read>(r: R, path: &str, station_order: Option<&[String]>) -> Result<BarrierCounts> {
    let mut rdr = reader(r);
    check_header(path, rdr.headers()?, &HEADER)?;
    let mut stations: Vec<String> = station_order.map(<[String]>::to_vec).unwrap_or_default();
    let mut index: HashMap<String, usize> = stations.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    let mut cells: BTreeMap<NaiveDate, HashMap<usize, (f64, f64)>> = BTreeMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        if rec.len() != HEADER.len() {
            return Err(OdError::schema(path, format!("line {line}: expected 4 fields, got {}", rec.len())));
        }
        let date = parse_date(path, line, &rec[0])?;
        let id = rec[1].to_string();
        let s = match index.get(&id) {
            Some(&s) => s,
            None if station_order.is_some() => {
                return Err(OdError::schema(path, format!("line {line}: unknown station '{id}'")));
            }
            None => {
                stations.push(id.clone());
                index.insert(id.clone(), stations.len() - 1);
                stations.len() - 1
            }
        };
        let dep = parse_f64(path, line, "departures", &rec[2])?;
        let arr = parse_f64(path, line, "arrivals", &rec[3])?;
        if dep < 0.0 || arr < 0.0 {
            return Err(OdError::schema(path, format!("line {line}: counts must be nonnegative")));
        }
        if cells.entry(date).or_default().insert(s, (dep, arr)).is_some() {
            return Err(OdError::schema(path, format!("line {line}: duplicate row for {date} / {id}")));
        }
    }
    if cells.is_empty() {
        return Err(OdError::schema(path, "no data rows"));
    }
    if stations.is_empty() {
        return Err(OdError::EmptyNetwork);
    }
    let n = stations.len();
    let mut gaps = Vec::new();
    for (date, row) in &cells {
        for (s, id) in stations.iter().enumerate() {
            if !row.contains_key(&s) {
                gaps.push(format!("{date}/{id}"));
            }
        }
    }
    if !gaps.is_empty() {
        return Err(OdError::MissingData(gaps.join(", ")));
    }
    let t = cells.len();
    let mut dep = DMatrix::zeros(t, n);
    let mut arr = DMatrix::zeros(t, n);
    let mut dates = Vec::with_capacity(t);
    let mut imbalances = Vec::new();
    for (d, (date, row)) in cells.into_iter().enumerate() {
        for (s, (a, b)) in row {
            dep[(d, s)] = a;
            arr[(d, s)] = b;
        }
        let delta = dep.row(d).sum() - arr.row(d).sum();
        if delta != 0.0 {
            imbalances.push(DayImbalance { date, delta });
        }
        dates.push(date);
    }
    let labels = dates.iter().map(|d| d.format("%Y-%m-%d").to_string()).collect();
    Ok(BarrierCounts {
        observations: ObservationSet::new(stations, labels, dep, arr)?,
        dates,
        imbalances,
    })
}

pub fn load_barrier_counts(path: &Path, station_order: Option<&[String]>) -> Result<BarrierCounts> {
    read_barrier_counts(open(path)?, &path.display().to_string(), station_order)
}

/// Writes margins in the barrier-count schema. Day labels must be ISO dates.
pub fn write_barrier_counts<W: Write>(w: W, obs: &ObservationSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(HEADER)?;
    for (t, label) in obs.day_labels().iter().enumerate() {
        NaiveDate::parse_from_str(label, "%Y-%m-%d")
            .map_err(|_| OdError::param("day_labels", format!("'{label}' is not an ISO-8601 date")))?;
        for (i, id) in obs.station_ids().iter().enumerate() {
            w.write_record([
                label.clone(),
                id.clone(),
                format_sig12(obs.departures()[(t, i)]),
                format_sig12(obs.arrivals()[(t, i)]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(days: usize, stations: usize, skew: bool) -> String {
        let mut s = String::from("date,station_id,departures,arrivals\n");
        let base = NaiveDate::from_ymd_opt(2012, 2, 1).unwrap();
        for d in (0..days).rev() {
            for k in 0..stations {
                let date = base + chrono::Days::new(d as u64);
                let dep = 10 + d + k;
                let arr = if skew && k == 0 { dep + 3 } else { dep };
                s.push_str(&format!("{},W{},{dep},{arr}\n", date.format("%Y-%m-%d"), k + 1));
            }
        }
        s
    }

    #[test]
    fn thirty_five_days_six_wharfs() {
        let b = read_barrier_counts(fixture(35, 6, false).as_bytes(), "b", None).unwrap();
        assert_eq!(b.observations.days(), 35);
        assert_eq!(b.observations.n(), 6);
        assert!(b.imbalances.is_empty());
        // Sorted by date even though the file is reversed.
        assert_eq!(b.observations.day_labels()[0], "2012-02-01");
        assert_eq!(b.observations.departures()[(0, 0)], 10.0);
    }

    #[test]
    fn imbalance_reported_per_day() {
        let b = read_barrier_counts(fixture(3, 2, true).as_bytes(), "b", None).unwrap();
        assert_eq!(b.imbalances.len(), 3);
        assert!(b.imbalances.iter().all(|d| d.delta == -3.0));
    }

    #[test]
    fn single_day_and_gaps() {
        let b = read_barrier_counts(fixture(1, 3, false).as_bytes(), "b", None).unwrap();
        assert_eq!(b.observations.days(), 1);
        let mut text = fixture(2, 3, false);
        text = text.lines().filter(|l| !l.starts_with("2012-02-02,W2")).collect::<Vec<_>>().join("\n");
        match read_barrier_counts(text.as_bytes(), "b", None) {
            Err(OdError::MissingData(msg)) => assert_eq!(msg, "2012-02-02/W2"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn explicit_order_and_round_trip() {
        let order = vec!["W3".to_string(), "W1".into(), "W2".into()];
        let b = read_barrier_counts(fixture(4, 3, false).as_bytes(), "b", Some(&order)).unwrap();
        assert_eq!(b.observations.station_ids(), order.as_slice());
        assert_eq!(b.observations.departures()[(0, 0)], 12.0);
        let mut buf = Vec::new();
        write_barrier_counts(&mut buf, &b.observations).unwrap();
        let again = read_barrier_counts(buf.as_slice(), "b", Some(&order)).unwrap();
        assert_eq!(again.observations, b.observations);
        let unknown = vec!["W1".to_string()];
        assert!(read_barrier_counts(fixture(1, 2, false).as_bytes(), "b", Some(&unknown)).is_err());
    }
}
