use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use super::{open, parse_date, parse_f64, reader};
use crate::error::{OdError, Result};

/// Daily covariates aligned with a set of observation dates.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyCovariates {
    pub labels: Vec<String>,
    /// `T×(L−1)`, one row per entry of the requested dates.
    pub values: DMatrix<f64>,
}

/// Reads `date,<label>,…` with one row per day. Every date in `dates` must
/// appear exactly once; extra dates are ignored.
pub fn read_covariates<R: Read>(r: R, path: &str, dates: &[NaiveDate]) -> Result<DailyCovariates> {
    let mut rdr = reader(r);
    let header = rdr.headers()?.clone();
    if header.len() < 2 || &header[0] != "date" {
        return Err(OdError::schema(path, "header must be 'date' followed by at least one covariate name"));
    }
    let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if let Some(l) = labels.iter().find(|l| l.is_empty()) {
        return Err(OdError::schema(path, format!("empty covariate name '{l}'")));
    }
    let mut rows: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        if rec.len() != header.len() {
            return Err(OdError::schema(
                path,
                format!("line {line}: expected {} fields, got {}", header.len(), rec.len()),
            ));
        }
        let date = parse_date(path, line, &rec[0])?;
        let values = (1..rec.len())
            .map(|c| parse_f64(path, line, &labels[c - 1], &rec[c]))
            .collect::<Result<Vec<_>>>()?;
        if rows.insert(date, values).is_some() {
            return Err(OdError::schema(path, format!("line {line}: duplicate date {date}")));
        }
    }
    let missing: Vec<String> = dates.iter().filter(|d| !rows.contains_key(d)).map(|d| d.to_string()).collect();
    if !missing.is_empty() {
        return Err(OdError::MissingData(missing.join(", ")));
    }
    let values = DMatrix::from_fn(dates.len(), labels.len(), |t, l| rows[&dates[t]][l]);
    Ok(DailyCovariates { labels, values })
}

pub fn load_covariates(path: &Path, dates: &[NaiveDate]) -> Result<DailyCovariates> {
    read_covariates(open(path)?, &path.display().to_string(), dates)
}
