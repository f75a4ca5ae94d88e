use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use super::mean_and_variance;
use crate::error::{OdError, Result};
use crate::estim::{estimate_lambda_regression, CovariateDesign};
use crate::matrix::{symmetrize_with_ids, OdMatrix};
use crate::sim::{derive_seed, replicate_seed, rng_from_seed, sample_regression_counts, DEFAULT_SURVEY_SCALE};
use crate::spectral::spectral_decompose;

const DESIGN_STREAM: u64 = 4;
const DATA_STREAM: u64 = 2;

/// Regression simulation: `β0` plus one coefficient matrix per covariate
/// of [`standard_design`].
#[derive(Debug, Clone)]
pub struct RegressionExperiment {
    pub beta0: OdMatrix,
    pub betas: Vec<DMatrix<f64>>,
    pub days: usize,
    pub seed: u64,
    pub survey_scale: f64,
}

impl RegressionExperiment {
    /// `β0 = truth`, a weekend effect `0.2·truth` and a temperature effect
    /// `0.1·truth`.
    pub fn reference(truth: OdMatrix, days: usize, seed: u64) -> Self {
        let b1 = truth.entries() * 0.2;
        let b2 = truth.entries() * 0.1;
        Self {
            beta0: truth,
            betas: vec![b1, b2],
            days,
            seed,
            survey_scale: DEFAULT_SURVEY_SCALE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMse {
    pub label: String,
    pub mse: f64,
    pub variance: f64,
}

/// Intercept, weekend indicator (days 6 and 7 of each week) and a uniform
/// `[−1, 1]` temperature anomaly.
pub fn standard_design(days: usize, seed: u64) -> Result<CovariateDesign> {
    let mut rng = rng_from_seed(seed);
    let mut cov = DMatrix::zeros(days, 2);
    for t in 0..days {
        cov[(t, 0)] = f64::from(t % 7 >= 5);
        cov[(t, 1)] = rng.random_range(-1.0..=1.0);
    }
    CovariateDesign::with_intercept(&cov, &["weekend", "temperature"])
}

/// Eigenvalue MSE of every coefficient matrix `β̂_l`, scored against
/// `diag(Pᵀ β_l P)` in the eigenbasis of `β0`.
pub fn replicate_regression(exp: &RegressionExperiment, replications: usize) -> Result<Vec<CoefficientMse>> {
    if replications == 0 {
        return Err(OdError::param("replications", "must be at least 1"));
    }
    if exp.betas.len() != 2 {
        return Err(OdError::Dimension(format!(
            "the standard design has 2 covariates, got {} coefficient matrices",
            exp.betas.len()
        )));
    }
    let truth_basis = spectral_decompose(&exp.beta0)?;
    let p = truth_basis.vectors();
    let mut targets: Vec<DVector<f64>> = vec![truth_basis.values().clone()];
    for b in &exp.betas {
        targets.push((p.transpose() * b * p).diagonal());
    }
    let survey = symmetrize_with_ids(
        &(exp.beta0.entries() * exp.survey_scale),
        exp.beta0.station_ids().to_vec(),
    )?;
    let basis = spectral_decompose(&survey)?;

    let errors: Vec<Vec<f64>> = (0..replications)
        .into_par_iter()
        .map(|i| {
            let seed = replicate_seed(exp.seed, i);
            let design = standard_design(exp.days, derive_seed(seed, DESIGN_STREAM))?;
            let sample = sample_regression_counts(&exp.beta0, &exp.betas, &design, derive_seed(seed, DATA_STREAM))?;
            let est = estimate_lambda_regression(&basis, &sample.observations, &design)?;
            let n = targets[0].len() as f64;
            Ok((0..targets.len())
                .map(|l| (est.coefficient_eigenvalues.column(l) - &targets[l]).norm_squared() / n)
                .collect())
        })
        .collect::<Vec<Result<Vec<f64>>>>()
        .into_iter()
        .collect::<Result<_>>()?;
    let labels = ["intercept", "weekend", "temperature"];
    Ok((0..targets.len())
        .map(|l| {
            let col: Vec<f64> = errors.iter().map(|e| e[l]).collect();
            let (mse, variance) = mean_and_variance(&col);
            CoefficientMse {
                label: labels[l].to_string(),
                mse,
                variance,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference_matrix;

    #[test]
    fn design_shape() {
        let d = standard_design(14, 1).unwrap();
        assert_eq!(d.covariates(), 3);
        assert_eq!(d.matrix()[(5, 1)], 1.0);
        assert_eq!(d.matrix()[(4, 1)], 0.0);
        assert!(d.matrix().column(2).iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn errors_shrink_with_days() {
        let short = replicate_regression(&RegressionExperiment::reference(reference_matrix(), 50, 2), 40).unwrap();
        let long = replicate_regression(&RegressionExperiment::reference(reference_matrix(), 2000, 2), 40).unwrap();
        for (s, l) in short.iter().zip(&long) {
            assert!(l.mse < s.mse / 5.0, "{}: {} -> {}", s.label, s.mse, l.mse);
        }
    }

    #[test]
    fn deterministic() {
        let e = RegressionExperiment::reference(reference_matrix(), 30, 9);
        assert_eq!(replicate_regression(&e, 3).unwrap(), replicate_regression(&e, 3).unwrap());
    }
}
