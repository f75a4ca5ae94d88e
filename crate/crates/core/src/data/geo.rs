use super::Station;
use crate::error::{OdError, Result};

pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMetric {
    /// Great-circle distance on a sphere of radius [`EARTH_RADIUS_KM`].
    #[default]
    Haversine,
    /// Planar distance on raw degrees; for sensitivity checks only.
    EuclideanDegrees,
}

pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

pub fn distance_km(metric: DistanceMetric, lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    match metric {
        DistanceMetric::Haversine => haversine_km(lat1, lon1, lat2, lon2),
        DistanceMetric::EuclideanDegrees => ((lat1 - lat2).powi(2) + (lon1 - lon2).powi(2)).sqrt(),
    }
}

/// Id of the station closest to `(lat, lon)`; equal distances go to the
/// lexicographically smaller id.
pub fn assign_nearest_station<'a>(lat: f64, lon: f64, stations: &'a [Station], metric: DistanceMetric) -> Result<&'a str> {
    let mut best: Option<(&Station, f64)> = None;
    for s in stations {
        let d = distance_km(metric, lat, lon, s.lat, s.lon);
        best = match best {
            None => Some((s, d)),
            Some((b, bd)) if d < bd || (d == bd && s.id < b.id) => Some((s, d)),
            keep => keep,
        };
    }
    best.map(|(s, _)| s.id.as_str()).ok_or(OdError::EmptyNetwork)
}
