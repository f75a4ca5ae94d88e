use nalgebra::{DMatrix, DVector};

use super::{drop_threshold, EstimatorReport, Method, PredictedMoments};
use crate::error::{OdError, Result};
use crate::spectral::SpectralForm;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoissonVariant {
    /// `Λ̂ = S_d⁻¹ Pᵀ [diag(PS)]⁻¹ Ȳ`.
    Prop1,
    /// `Λ̂ = (S_d PᵀP S_d)⁻¹ S_d Pᵀ Û⁻¹` with `Û = Ȳ_d⁻¹ P S` inverted
    /// elementwise.
    Appendix,
}

pub(crate) fn usable_components(basis: &SpectralForm) -> (Vec<usize>, Vec<usize>) {
    let tol = drop_threshold(basis.n());
    (0..basis.n()).partition(|&k| basis.column_sums()[k].abs() >= tol)
}

fn check_margins(basis: &SpectralForm, y_bar: &DVector<f64>) -> Result<()> {
    if y_bar.len() != basis.n() {
        return Err(OdError::Dimension(format!(
            "{} mean margins for a basis of size {}",
            y_bar.len(),
            basis.n()
        )));
    }
    if y_bar.iter().any(|v| !v.is_finite()) {
        return Err(OdError::Numeric("non-finite mean margin".into()));
    }
    Ok(())
}

fn all_dropped(n: usize) -> OdError {
    OdError::EstimationImpossible(format!(
        "every one of the {n} survey eigenvectors has a vanishing column sum"
    ))
}

/// `λ̂[k] = (Σ_i P[i][k]·Ȳ[i]) / S[k]` over usable components.
pub fn estimate_lambda_gaussian(basis: &SpectralForm, y_bar: &DVector<f64>) -> Result<EstimatorReport> {
    check_margins(basis, y_bar)?;
    let (keep, dropped) = usable_components(basis);
    if keep.is_empty() {
        return Err(all_dropped(basis.n()));
    }
    let pty = basis.vectors().tr_mul(y_bar);
    let mut lambda = DVector::zeros(basis.n());
    for &k in &keep {
        lambda[k] = pty[k] / basis.column_sums()[k];
    }
    let mut report = EstimatorReport::from_lambda(Method::Gaussian, basis, lambda)?;
    report.dropped_components = dropped;
    Ok(report)
}

/// Poisson closed forms. Stations with `|(PS)_i|` below the drop tolerance
/// contribute nothing and are listed in `dropped_stations`.
pub fn estimate_lambda_poisson(
    basis: &SpectralForm,
    y_bar: &DVector<f64>,
    variant: PoissonVariant,
) -> Result<EstimatorReport> {
    check_margins(basis, y_bar)?;
    let n = basis.n();
    let tol = drop_threshold(n);
    let (keep, dropped) = usable_components(basis);
    if keep.is_empty() {
        return Err(all_dropped(n));
    }
    let ps = basis.row_weights();
    let mut dropped_stations = Vec::new();
    let mut scaled = DVector::zeros(n);
    for i in 0..n {
        if ps[i].abs() < tol {
            dropped_stations.push(i);
        } else {
            scaled[i] = y_bar[i] / ps[i];
        }
    }
    if dropped_stations.len() == n {
        return Err(OdError::EstimationImpossible(
            "every station has a vanishing row weight P·S".into(),
        ));
    }
    let p = basis.vectors();
    let s = basis.column_sums();
    let mut lambda = DVector::zeros(n);
    let mut warnings = Vec::new();
    let method = match variant {
        PoissonVariant::Prop1 => {
            let pt = p.tr_mul(&scaled);
            for &k in &keep {
                lambda[k] = pt[k] / s[k];
            }
            Method::PoissonProp1
        }
        PoissonVariant::Appendix => {
            if y_bar.iter().any(|v| *v == 0.0) {
                warnings.push("zero mean margin: Û has an infinite entry, its reciprocal is taken as 0".into());
            }
            let m = keep.len();
            let mut sub = DMatrix::zeros(n, m);
            for (c, &k) in keep.iter().enumerate() {
                sub.set_column(c, &(p.column(k) * s[k]));
            }
            let gram = sub.tr_mul(&sub);
            let rhs = sub.tr_mul(&scaled);
            let sol = gram.lu().solve(&rhs).ok_or_else(|| {
                OdError::Numeric("S_d PᵀP S_d is singular on the usable components".into())
            })?;
            for (c, &k) in keep.iter().enumerate() {
                lambda[k] = sol[c];
            }
            Method::PoissonAppendix
        }
    };
    let mut report = EstimatorReport::from_lambda(method, basis, lambda)?;
    report.dropped_components = dropped;
    report.dropped_stations = dropped_stations;
    report.warnings.extend(warnings);
    Ok(report)
}

/// `S_d⁻¹ Pᵀ [diag(PS)]⁻¹ P S_d Λ − Λ`: how far the first Poisson closed
/// form is from an exact inverse on noiseless margins.
pub fn prop1_recovery_gap(basis: &SpectralForm, lambda: &DVector<f64>) -> Result<DVector<f64>> {
    if lambda.len() != basis.n() {
        return Err(OdError::Dimension("eigenvalue vector length".into()));
    }
    let a = basis.margin_operator();
    let y = &a * lambda;
    let report = estimate_lambda_poisson(basis, &y, PoissonVariant::Prop1)?;
    Ok(report.lambda_hat - lambda)
}

/// Large-count mean and covariance of the Gaussian estimator built on
/// `survey` when the data come from `truth`:
/// `m = S̃_d⁻¹ P̃ᵀ P S_d Λ`, `Σ = S̃_d⁻¹ [D + P̃ᵀ diag(P S_d Λ) P̃] S̃_d⁻¹ / T`.
/// `D` defaults to zero. Dropped components get zero rows and columns.
pub fn predicted_moments(
    survey: &SpectralForm,
    truth: &SpectralForm,
    days: usize,
    d: Option<&DMatrix<f64>>,
) -> Result<PredictedMoments> {
    let n = survey.n();
    if truth.n() != n {
        return Err(OdError::Dimension("survey and truth bases differ in size".into()));
    }
    if days == 0 {
        return Err(OdError::param("days", "must be at least 1"));
    }
    let mu = truth.margin_operator() * truth.values();
    let pt = survey.vectors();
    let mut inner = pt.transpose() * DMatrix::from_diagonal(&mu) * pt;
    if let Some(d) = d {
        if d.shape() != (n, n) {
            return Err(OdError::Dimension("D must be n x n".into()));
        }
        inner += d;
    }
    let (keep, _) = usable_components(survey);
    let mut sinv = DVector::zeros(n);
    for &k in &keep {
        sinv[k] = 1.0 / survey.column_sums()[k];
    }
    let proj = pt.tr_mul(&mu);
    let mean = proj.component_mul(&sinv);
    let sd = DMatrix::from_diagonal(&sinv);
    let covariance = &sd * inner * &sd / days as f64;
    Ok(PredictedMoments { mean, covariance })
}

impl EstimatorReport {
    pub fn with_predicted_moments(mut self, m: PredictedMoments) -> Self {
        self.predicted_moments = Some(m);
        self
    }
}
