use nalgebra::{DMatrix, DVector};

use super::{project_constraints, EstimatorReport, Method, Projection};
use crate::error::{OdError, Result};
use crate::observation::ObservationSet;
use crate::spectral::{decompose_matrix, SpectralForm};

/// `r̂_ob[i][j] = (s̄_i· + s̄_·j) / (2n)` from mean departures `s̄_i·` and
/// mean arrivals `s̄_·j`.
pub fn observation_matrix(mean_departures: &DVector<f64>, mean_arrivals: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = mean_departures.len();
    if mean_arrivals.len() != n {
        return Err(OdError::Dimension("departure and arrival means differ in length".into()));
    }
    let denom = 2.0 * n as f64;
    Ok(DMatrix::from_fn(n, n, |i, j| (mean_departures[i] + mean_arrivals[j]) / denom))
}

/// Combines a feasible prior with the observation-based matrix:
///
/// `r̂_ah[i][j] = (n/2)·(ob[i][j]·π[i][j]/ρ_i + ob[j][i]·π[j][i]/ρ_j)`
///
/// where `ρ_i = Σ_k ob[i][k]` is the full row sum of row `i`. The diagonal
/// is zero. Rows with `ρ_i = 0` contribute nothing and are returned as
/// isolated stations.
pub fn adhoc_combine(prior: &DMatrix<f64>, ob: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let n = prior.nrows();
    if prior.shape() != (n, n) || ob.shape() != (n, n) {
        return Err(OdError::Dimension(format!(
            "prior {:?} and observation matrix {:?}",
            prior.shape(),
            ob.shape()
        )));
    }
    let rho: Vec<f64> = (0..n).map(|i| ob.row(i).sum()).collect();
    let isolated: Vec<usize> = (0..n).filter(|&i| rho[i] == 0.0).collect();
    let share = |i: usize, j: usize| {
        if rho[i] == 0.0 {
            0.0
        } else {
            ob[(i, j)] * prior[(i, j)] / rho[i]
        }
    };
    let half_n = n as f64 / 2.0;
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                out[(i, j)] = half_n * (share(i, j) + share(j, i));
            }
        }
    }
    Ok((out, isolated))
}

/// Ad hoc estimate: the projected spectral prior `reconstruct(P̃, λ_N)`
/// reweighted by observed margin shares. `lambda_hat` holds the eigenvalues
/// of the resulting matrix in descending order.
pub fn estimate_adhoc(basis: &SpectralForm, lambda_n: &DVector<f64>, obs: &ObservationSet) -> Result<EstimatorReport> {
    let n = basis.n();
    if lambda_n.len() != n || obs.n() != n {
        return Err(OdError::Dimension(format!(
            "basis of size {n}, prior eigenvalues of length {}, {} stations observed",
            lambda_n.len(),
            obs.n()
        )));
    }
    if obs.days() == 0 {
        return Err(OdError::param("obs", "at least one day is required"));
    }
    let prior = project_constraints(&basis.reconstruct_with(lambda_n)?)?;
    let ob = observation_matrix(&obs.mean_departures(), &obs.mean_arrivals())?;
    let (raw, isolated) = adhoc_combine(prior.matrix.entries(), &ob)?;
    let Projection { matrix, violation } = project_constraints(&raw)?;
    let lambda_hat = decompose_matrix(matrix.entries())?.values().clone();
    let mut warnings: Vec<String> = isolated
        .iter()
        .map(|i| format!("station {} is isolated: observation-based row sum is zero", obs.station_ids()[*i]))
        .collect();
    if basis.is_degenerate() {
        warnings.push(format!(
            "survey spectrum has repeated eigenvalues in blocks {:?}",
            basis.degenerate_blocks()
        ));
    }
    Ok(EstimatorReport {
        method: Method::Adhoc,
        lambda_hat,
        rz_hat: matrix.with_ids(obs.station_ids().to_vec())?,
        rz_raw: raw,
        p_rz_hat: None,
        constraint_violation: violation,
        dropped_components: Vec::new(),
        dropped_stations: isolated,
        iterations: 0,
        warnings,
        predicted_moments: None,
        objective_trace: Vec::new(),
    })
}
