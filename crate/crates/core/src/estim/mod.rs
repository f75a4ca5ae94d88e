//! Estimators of the zone-ticket matrix `R_z` from margins and a survey
//! eigenbasis.
//!
//! All eigenvalue-transfer estimators share a survey [`SpectralForm`]
//! (`P̃`, `S̃`) and differ in how they map mean departures `Ȳ` to
//! eigenvalues. Every report carries the constraint-projected matrix and
//! the size of the projection.

mod adhoc;
mod closed_form;
mod mle;
mod negbin;
mod project;
mod regression;

pub use adhoc::{adhoc_combine, estimate_adhoc, observation_matrix};
pub use closed_form::{
    estimate_lambda_gaussian, estimate_lambda_poisson, predicted_moments, prop1_recovery_gap,
    PoissonVariant,
};
pub use mle::{estimate_lambda_mle, nb_margin_loglik, poisson_margin_loglik, LikelihoodFamily, MleOptions};
pub use negbin::{fit_negbin, FitFlag, NegBinFit};
pub use project::{project_constraints, Projection};
pub use regression::{estimate_lambda_regression, CovariateDesign, CovariateEffect, RegressionEstimate};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::Result;
use crate::matrix::{OdMatrix, format_sig12, write_matrix_csv};
use crate::observation::ObservationSet;
use crate::spectral::SpectralForm;

/// Components with `|S[k]| < tol·√n` (and stations with `|(PS)_i|` below
/// the same bound) are dropped rather than inverted.
pub const DROP_TOL: f64 = 1e-8;

pub(crate) fn drop_threshold(n: usize) -> f64 {
    DROP_TOL * (n as f64).sqrt()
}

/// Estimator tag recorded in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gaussian,
    PoissonProp1,
    PoissonAppendix,
    MleConstrained,
    Regression,
    Adhoc,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Gaussian => "gaussian",
            Method::PoissonProp1 => "poisson_prop1",
            Method::PoissonAppendix => "poisson_appendix",
            Method::MleConstrained => "mle_constrained",
            Method::Regression => "regression",
            Method::Adhoc => "adhoc",
        }
    }

    pub const ALL: [Method; 6] = [
        Method::Gaussian,
        Method::PoissonProp1,
        Method::PoissonAppendix,
        Method::MleConstrained,
        Method::Regression,
        Method::Adhoc,
    ];
}

impl std::str::FromStr for Method {
    type Err = crate::OdError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gaussian" => Method::Gaussian,
            "poisson_prop1" | "prop1" => Method::PoissonProp1,
            "poisson_appendix" | "appendix" => Method::PoissonAppendix,
            "mle" | "mle_constrained" => Method::MleConstrained,
            "regression" => Method::Regression,
            "adhoc" | "ad_hoc" => Method::Adhoc,
            other => {
                return Err(crate::OdError::param(
                    "method",
                    format!(
                        "unknown method '{other}' (expected gaussian, poisson_prop1, \
                         poisson_appendix, mle, regression, adhoc)"
                    ),
                ))
            }
        })
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// First two moments of the estimator's sampling distribution given the
/// survey basis, in the large-count normal approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedMoments {
    pub mean: DVector<f64>,
    /// Covariance of `λ̂` for the stated number of days.
    pub covariance: DMatrix<f64>,
}

/// Output of every estimator.
#[derive(Debug, Clone)]
pub struct EstimatorReport {
    pub method: Method,
    pub lambda_hat: DVector<f64>,
    /// Constraint-projected estimate (nonnegative, zero diagonal, symmetric).
    pub rz_hat: OdMatrix,
    /// Estimate before projection.
    pub rz_raw: DMatrix<f64>,
    pub p_rz_hat: Option<f64>,
    /// `‖rz_raw − rz_hat‖_F`.
    pub constraint_violation: f64,
    pub dropped_components: Vec<usize>,
    pub dropped_stations: Vec<usize>,
    pub iterations: usize,
    pub warnings: Vec<String>,
    pub predicted_moments: Option<PredictedMoments>,
    /// Objective after each accepted iteration (likelihood ascent only).
    pub objective_trace: Vec<f64>,
}

impl EstimatorReport {
    pub(crate) fn from_lambda(
        method: Method,
        basis: &SpectralForm,
        lambda_hat: DVector<f64>,
    ) -> Result<Self> {
        let raw = basis.reconstruct_with(&lambda_hat)?;
        let Projection { matrix, violation } = project_constraints(&raw)?;
        let mut warnings = Vec::new();
        if basis.is_degenerate() {
            warnings.push(format!(
                "survey spectrum has repeated eigenvalues in blocks {:?}; eigenvector transfer is unreliable there",
                basis.degenerate_blocks()
            ));
        }
        Ok(Self {
            method,
            lambda_hat,
            rz_hat: matrix,
            rz_raw: raw,
            p_rz_hat: None,
            constraint_violation: violation,
            dropped_components: Vec::new(),
            dropped_stations: Vec::new(),
            iterations: 0,
            warnings,
            predicted_moments: None,
            objective_trace: Vec::new(),
        })
    }

    /// Relabels the projected matrix with the caller's station ids.
    pub fn with_station_ids(mut self, ids: Vec<String>) -> Result<Self> {
        self.rz_hat = self.rz_hat.with_ids(ids)?;
        Ok(self)
    }

    /// Expected departures and arrivals of the projected estimate.
    pub fn expected_margins(&self) -> (DVector<f64>, DVector<f64>) {
        self.rz_hat.margins()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "method": self.method.as_str(),
            "lambda_hat": self.lambda_hat.iter().collect::<Vec<_>>(),
            "constraint_violation": self.constraint_violation,
            "p_Rz_hat": self.p_rz_hat,
            "dropped_components": self.dropped_components,
            "dropped_stations": self.dropped_stations,
            "iterations": self.iterations,
            "warnings": self.warnings,
            "station_ids": self.rz_hat.station_ids(),
        })
    }

    pub fn write_matrix_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        write_matrix_csv(writer, self.rz_hat.station_ids(), self.rz_hat.entries())
    }
}

/// Runs `method` with its default settings: survey eigenvalues as the
/// likelihood start, an intercept-only design for regression, and the
/// Gaussian eigenvalues as the ad hoc prior.
pub fn estimate(
    method: Method,
    basis: &SpectralForm,
    obs: &ObservationSet,
    likelihood: LikelihoodFamily,
) -> Result<EstimatorReport> {
    let y_bar = obs.mean_departures();
    match method {
        Method::Gaussian => estimate_lambda_gaussian(basis, &y_bar),
        Method::PoissonProp1 => estimate_lambda_poisson(basis, &y_bar, PoissonVariant::Prop1),
        Method::PoissonAppendix => estimate_lambda_poisson(basis, &y_bar, PoissonVariant::Appendix),
        Method::MleConstrained => estimate_lambda_mle(basis, obs, likelihood, basis.values(), &MleOptions::default()),
        Method::Regression => {
            let design = CovariateDesign::intercept(obs.days())?;
            Ok(estimate_lambda_regression(basis, obs, &design)?.intercept)
        }
        Method::Adhoc => {
            let prior = estimate_lambda_gaussian(basis, &y_bar)?;
            estimate_adhoc(basis, &prior.lambda_hat, obs)
        }
    }
}

impl SpectralForm {
    /// `P·diag(λ)·Pᵀ` in this basis.
    pub fn reconstruct_with(&self, lambda: &DVector<f64>) -> Result<DMatrix<f64>> {
        crate::spectral::reconstruct(self.vectors(), lambda)
    }
}

/// Formats a vector for log lines.
pub fn fmt_vec(v: &DVector<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|x| format_sig12(*x)).collect();
    format!("[{}]", parts.join(", "))
}
