use nalgebra::{DMatrix, DVector};

use super::closed_form::usable_components;
use super::{drop_threshold, EstimatorReport, Method};
use crate::error::{OdError, Result};
use crate::observation::ObservationSet;
use crate::spectral::{reconstruct, SpectralForm};

/// Condition number of `X` at or above which the design is rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Daily regressors: row `t` holds `x^t`, column 0 is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateDesign {
    x: DMatrix<f64>,
    labels: Vec<String>,
    condition: f64,
}

impl CovariateDesign {
    pub fn new(x: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        let (t, l) = x.shape();
        if l == 0 || labels.len() != l {
            return Err(OdError::Dimension(format!(
                "{} labels for a design with {l} columns",
                labels.len()
            )));
        }
        if t < l {
            return Err(OdError::param(
                "design",
                format!("{t} days cannot identify {l} coefficients"),
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(OdError::param("design", "non-finite regressor"));
        }
        if x.column(0).iter().any(|v| *v != 1.0) {
            return Err(OdError::param("design", "first column must be the all-ones intercept"));
        }
        let sv = x.clone().svd(false, false).singular_values;
        let smax = sv.max();
        let smin = sv.min();
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(condition < MAX_CONDITION) {
            return Err(OdError::RankDeficient { condition });
        }
        Ok(Self { x, labels, condition })
    }

    /// Intercept-only design over `days` days.
    pub fn intercept(days: usize) -> Result<Self> {
        Self::new(DMatrix::from_element(days, 1, 1.0), vec!["intercept".into()])
    }

    /// Intercept followed by the given covariate columns.
    pub fn with_intercept(covariates: &DMatrix<f64>, labels: &[&str]) -> Result<Self> {
        let (t, m) = covariates.shape();
        let mut x = DMatrix::from_element(t, m + 1, 1.0);
        x.view_mut((0, 1), (t, m)).copy_from(covariates);
        let mut all = vec!["intercept".to_string()];
        all.extend(labels.iter().map(|s| s.to_string()));
        Self::new(x, all)
    }

    /// Number of columns `L`, intercept included.
    pub fn covariates(&self) -> usize {
        self.x.ncols()
    }

    pub fn days(&self) -> usize {
        self.x.nrows()
    }

    /// `T×L`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }
}

/// A covariate's coefficient matrix. Signed; not projected.
#[derive(Debug, Clone)]
pub struct CovariateEffect {
    pub label: String,
    pub lambda_hat: DVector<f64>,
    pub matrix: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct RegressionEstimate {
    /// `β̂_0`, constraint-projected.
    pub intercept: EstimatorReport,
    /// `β̂_1 … β̂_{L−1}` in design order.
    pub effects: Vec<CovariateEffect>,
    /// `n×L`; column `l` holds the eigenvalues of `β̂_l`.
    pub coefficient_eigenvalues: DMatrix<f64>,
}

impl RegressionEstimate {
    /// Every coefficient matrix in design order, `β̂_0` unprojected.
    pub fn raw_coefficients(&self) -> Vec<&DMatrix<f64>> {
        std::iter::once(&self.intercept.rz_raw)
            .chain(self.effects.iter().map(|e| &e.matrix))
            .collect()
    }
}

/// `Λ̂_R = S_d⁻¹ Pᵀ [diag(PS)]⁻¹ Y Xᵀ (X Xᵀ)⁻¹` with `Y` arranged `n×T` and
/// `X` arranged `L×T`.
pub fn estimate_lambda_regression(
    basis: &SpectralForm,
    obs: &ObservationSet,
    design: &CovariateDesign,
) -> Result<RegressionEstimate> {
    let n = basis.n();
    if obs.n() != n {
        return Err(OdError::Dimension(format!("{} stations observed for a basis of size {n}", obs.n())));
    }
    if obs.days() != design.days() {
        return Err(OdError::Dimension(format!(
            "{} observed days for a design over {} days",
            obs.days(),
            design.days()
        )));
    }
    let (keep, dropped) = usable_components(basis);
    if keep.is_empty() {
        return Err(OdError::EstimationImpossible(
            "every survey eigenvector has a vanishing column sum".into(),
        ));
    }
    let tol = drop_threshold(n);
    let ps = basis.row_weights();
    let mut dropped_stations = Vec::new();
    let mut w = DVector::zeros(n);
    for i in 0..n {
        if ps[i].abs() < tol {
            dropped_stations.push(i);
        } else {
            w[i] = 1.0 / ps[i];
        }
    }
    let y = obs.departures().transpose();
    let x = design.matrix().transpose();
    let xxt = &x * x.transpose();
    let xxt_inv = xxt
        .try_inverse()
        .ok_or(OdError::RankDeficient { condition: design.condition_number() })?;
    let coef = &y * x.transpose() * xxt_inv;

    let p = basis.vectors();
    let mut scaled = coef;
    for i in 0..n {
        scaled.row_mut(i).scale_mut(w[i]);
    }
    let proj = p.tr_mul(&scaled);
    let l = design.covariates();
    let mut eig = DMatrix::zeros(n, l);
    for &k in &keep {
        let s = basis.column_sums()[k];
        for c in 0..l {
            eig[(k, c)] = proj[(k, c)] / s;
        }
    }

    let mut intercept = EstimatorReport::from_lambda(Method::Regression, basis, eig.column(0).into_owned())?;
    intercept.dropped_components = dropped;
    intercept.dropped_stations = dropped_stations;
    let mut effects = Vec::with_capacity(l - 1);
    for c in 1..l {
        let lambda = eig.column(c).into_owned();
        let matrix = reconstruct(p, &lambda)?;
        effects.push(CovariateEffect {
            label: design.labels()[c].clone(),
            lambda_hat: lambda,
            matrix,
        });
    }
    Ok(RegressionEstimate {
        intercept,
        effects,
        coefficient_eigenvalues: eig,
    })
}
