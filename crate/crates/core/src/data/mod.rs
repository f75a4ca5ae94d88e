//! Ingestion of station coordinates, survey journeys, barrier counts and
//! daily covariates.
//!
//! All three files are headed CSV. Fields are trimmed; numbers are written
//! with twelve significant digits.

mod barriers;
mod covariates;
mod geo;
mod journeys;
mod stations;

pub use barriers::{load_barrier_counts, read_barrier_counts, write_barrier_counts, BarrierCounts, DayImbalance};
pub use covariates::{load_covariates, read_covariates, DailyCovariates};
pub use geo::{assign_nearest_station, distance_km, haversine_km, DistanceMetric, EARTH_RADIUS_KM};
pub use journeys::{
    build_survey_od, load_journeys, read_journeys, write_journeys, Endpoint, JourneyRecord, SurveyOd, TicketClass,
};
pub use stations::{load_stations, read_stations, write_stations, Station};

use chrono::NaiveDate;

use crate::error::{OdError, Result};

pub(crate) fn parse_date(path: &str, line: usize, s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|_| OdError::schema(path, format!("line {line}: invalid ISO-8601 date '{s}'")))
}

pub(crate) fn parse_f64(path: &str, line: usize, field: &str, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| OdError::schema(path, format!("line {line}: {field} is not a finite number: '{s}'")))
}

pub(crate) fn check_header(path: &str, got: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = got.iter().collect();
    if got != expected {
        return Err(OdError::schema(
            path,
            format!("header must be '{}', found '{}'", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

pub(crate) fn reader<R: std::io::Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(r)
}

pub(crate) fn open(path: &std::path::Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(OdError::from)
}
