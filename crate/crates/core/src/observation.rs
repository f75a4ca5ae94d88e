//! Per-day departure and arrival margins.

use nalgebra::{DMatrix, DVector};

use crate::error::{OdError, Result};
use crate::matrix::OdMatrix;

/// Departure and arrival margins for `T` days over `n` stations.
///
/// Row `t` of [`departures`](Self::departures) is the day-`t` departure
/// vector `Y_D`; likewise for arrivals.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    station_ids: Vec<String>,
    day_labels: Vec<String>,
    departures: DMatrix<f64>,
    arrivals: DMatrix<f64>,
    zone_totals: Option<Vec<f64>>,
}

impl ObservationSet {
    pub fn new(
        station_ids: Vec<String>,
        day_labels: Vec<String>,
        departures: DMatrix<f64>,
        arrivals: DMatrix<f64>,
    ) -> Result<Self> {
        let (t, n) = departures.shape();
        if arrivals.shape() != (t, n) {
            return Err(OdError::Dimension(format!(
                "departures {:?} vs arrivals {:?}",
                departures.shape(),
                arrivals.shape()
            )));
        }
        if station_ids.len() != n || day_labels.len() != t {
            return Err(OdError::Dimension(format!(
                "{} station ids / {} day labels for {t}x{n} margins",
                station_ids.len(),
                day_labels.len()
            )));
        }
        if departures.iter().chain(arrivals.iter()).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(OdError::InvalidMatrix(
                "margins must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            station_ids,
            day_labels,
            departures,
            arrivals,
            zone_totals: None,
        })
    }

    /// Margins of a sequence of daily OD matrices (row sums and column sums).
    pub fn from_days(days: &[OdMatrix]) -> Result<Self> {
        let first = days
            .first()
            .ok_or_else(|| OdError::param("days", "at least one day is required"))?;
        let n = first.n();
        let t = days.len();
        let mut dep = DMatrix::zeros(t, n);
        let mut arr = DMatrix::zeros(t, n);
        for (d, x) in days.iter().enumerate() {
            if x.n() != n {
                return Err(OdError::Dimension(format!("day {d} has {} stations", x.n())));
            }
            let (yd, ya) = x.margins();
            dep.set_row(d, &yd.transpose());
            arr.set_row(d, &ya.transpose());
        }
        let labels = (0..t).map(|d| format!("day{}", d + 1)).collect();
        Self::new(first.station_ids().to_vec(), labels, dep, arr)
    }

    pub fn with_zone_totals(mut self, totals: Vec<f64>) -> Result<Self> {
        if totals.len() != self.days() {
            return Err(OdError::Dimension(format!(
                "{} zone totals for {} days",
                totals.len(),
                self.days()
            )));
        }
        self.zone_totals = Some(totals);
        Ok(self)
    }

    pub fn days(&self) -> usize {
        self.departures.nrows()
    }

    pub fn n(&self) -> usize {
        self.departures.ncols()
    }

    pub fn station_ids(&self) -> &[String] {
        &self.station_ids
    }

    pub fn day_labels(&self) -> &[String] {
        &self.day_labels
    }

    pub fn departures(&self) -> &DMatrix<f64> {
        &self.departures
    }

    pub fn arrivals(&self) -> &DMatrix<f64> {
        &self.arrivals
    }

    pub fn zone_totals(&self) -> Option<&[f64]> {
        self.zone_totals.as_deref()
    }

    /// `Ȳ`: per-station mean departures across days.
    pub fn mean_departures(&self) -> DVector<f64> {
        column_means(&self.departures)
    }

    pub fn mean_arrivals(&self) -> DVector<f64> {
        column_means(&self.arrivals)
    }

    /// Per-day `Σ departures − Σ arrivals`.
    pub fn imbalances(&self) -> Vec<f64> {
        (0..self.days())
            .map(|t| self.departures.row(t).sum() - self.arrivals.row(t).sum())
            .collect()
    }

    /// Reported ratio `Σ Ỹ_D / (2·N_Rz)` averaged over days, when zone-ticket
    /// totals are present.
    pub fn zone_travel_ratio(&self) -> Option<f64> {
        let totals = self.zone_totals.as_ref()?;
        let mut acc = 0.0;
        let mut used = 0;
        for (t, &nz) in totals.iter().enumerate() {
            if nz > 0.0 {
                acc += self.departures.row(t).sum() / (2.0 * nz);
                used += 1;
            }
        }
        (used > 0).then(|| acc / used as f64)
    }
}

fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let t = m.nrows().max(1) as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / t))
}

/// Margins left for the unknown component after subtracting known flows.
#[derive(Debug, Clone)]
pub struct ResidualMargins {
    pub observations: ObservationSet,
    /// Station-days where the residual went negative and was clamped to 0.
    pub clamped: usize,
}

/// Default fraction of stations per day allowed to need clamping.
pub const DEFAULT_CLAMP_FRACTION: f64 = 0.05;

/// `Ỹ = Y − margins(Σ known)` per day, clamped at zero.
///
/// `known` holds the per-day known components (casual, regular-specific,
/// event). Each is subtracted from every day. A day on which more than
/// `max(1, ceil(clamp_fraction·n))` stations go negative is rejected.
pub fn residual_margins(
    obs: &ObservationSet,
    known: &[&OdMatrix],
    clamp_fraction: f64,
) -> Result<ResidualMargins> {
    let n = obs.n();
    let mut known_dep = DVector::zeros(n);
    let mut known_arr = DVector::zeros(n);
    for k in known {
        if k.n() != n {
            return Err(OdError::Dimension(format!(
                "known component has {} stations, observations have {n}",
                k.n()
            )));
        }
        let (d, a) = k.margins();
        known_dep += d;
        known_arr += a;
    }
    let allowed = ((clamp_fraction * n as f64).ceil() as usize).max(1);
    let mut dep = obs.departures.clone();
    let mut arr = obs.arrivals.clone();
    let mut clamped = 0;
    for t in 0..obs.days() {
        let mut day_clamped = 0;
        for i in 0..n {
            for (m, known) in [(&mut dep, &known_dep), (&mut arr, &known_arr)] {
                let v = m[(t, i)] - known[i];
                if v < 0.0 {
                    m[(t, i)] = 0.0;
                    day_clamped += 1;
                } else {
                    m[(t, i)] = v;
                }
            }
        }
        if day_clamped > 2 * allowed {
            return Err(OdError::DataInconsistency(format!(
                "day {} ('{}'): {day_clamped} negative residual margins exceed the allowed {}",
                t,
                obs.day_labels[t],
                2 * allowed
            )));
        }
        clamped += day_clamped;
    }
    let mut observations = ObservationSet::new(
        obs.station_ids.clone(),
        obs.day_labels.clone(),
        dep,
        arr,
    )?;
    observations.zone_totals = obs.zone_totals.clone();
    Ok(ResidualMargins {
        observations,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs_from(x: &OdMatrix) -> ObservationSet {
        ObservationSet::from_days(std::slice::from_ref(x)).unwrap()
    }

    #[test]
    fn no_known_components_is_identity() {
        let obs = obs_from(&crate::reference_matrix());
        let r = residual_margins(&obs, &[], DEFAULT_CLAMP_FRACTION).unwrap();
        assert_eq!(r.observations.departures(), obs.departures());
        assert_eq!(r.clamped, 0);
    }

    #[test]
    fn subtracting_casual_leaves_regular_margins() {
        let casual = OdMatrix::from_rows(&[
            vec![0.0, 4.0, 1.0],
            vec![2.0, 0.0, 0.0],
            vec![3.0, 5.0, 0.0],
        ])
        .unwrap();
        let regular = OdMatrix::from_rows(&[
            vec![0.0, 10.0, 7.0],
            vec![10.0, 0.0, 2.0],
            vec![7.0, 2.0, 0.0],
        ])
        .unwrap();
        let total = OdMatrix::from_matrix(casual.entries() + regular.entries()).unwrap();
        let r = residual_margins(&obs_from(&total), &[&casual], DEFAULT_CLAMP_FRACTION).unwrap();
        let (rd, ra) = regular.margins();
        assert_eq!(r.observations.departures().row(0).transpose(), rd);
        assert_eq!(r.observations.arrivals().row(0).transpose(), ra);
    }

    #[test]
    fn clamps_single_negative_station() {
        let obs = ObservationSet::new(
            vec!["A".into(), "B".into(), "C".into()],
            vec!["d".into()],
            DMatrix::from_row_slice(1, 3, &[1.0, 5.0, 5.0]),
            DMatrix::from_row_slice(1, 3, &[4.0, 4.0, 3.0]),
        )
        .unwrap();
        let known = OdMatrix::from_rows(&[
            vec![0.0, 2.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let r = residual_margins(&obs, &[&known], DEFAULT_CLAMP_FRACTION).unwrap();
        assert_eq!(r.clamped, 1);
        assert_eq!(r.observations.departures()[(0, 0)], 0.0);
        assert_eq!(r.observations.departures()[(0, 1)], 4.0);
    }

    #[test]
    fn rejects_widespread_negative_residuals() {
        let obs = obs_from(&OdMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap());
        let big = OdMatrix::from_rows(&[vec![0.0, 9.0], vec![9.0, 0.0]]).unwrap();
        assert!(matches!(
            residual_margins(&obs, &[&big], DEFAULT_CLAMP_FRACTION),
            Err(OdError::DataInconsistency(_))
        ));
    }

    #[test]
    fn totals_balance_for_generated_days() {
        let obs = obs_from(&crate::reference_matrix());
        assert_eq!(obs.imbalances(), vec![0.0]);
        assert_eq!(obs.mean_departures().sum(), 928.0);
    }

    #[test]
    fn zone_ratio() {
        let obs = obs_from(&crate::reference_matrix())
            .with_zone_totals(vec![464.0])
            .unwrap();
        assert_eq!(obs.zone_travel_ratio(), Some(1.0));
    }
}
