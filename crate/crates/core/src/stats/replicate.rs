use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::mean_and_variance;
use crate::error::{OdError, Result};
use crate::estim::{estimate, LikelihoodFamily, Method};
use crate::matrix::{symmetrize_with_ids, OdMatrix};
use crate::observation::ObservationSet;
use crate::sim::{
    bias_survey, derive_seed, draw_day, replicate_seed, rng_from_seed, sample_observations, Family, SimConfig,
    SurveyDesign,
};
use crate::spectral::spectral_decompose;

const SURVEY_STREAM: u64 = 1;
const DATA_STREAM: u64 = 2;
const SURVEY_DRAW_STREAM: u64 = 3;

/// What one replicate contributes to the summary.
#[derive(Debug, Clone)]
pub struct ReplicateOutcome {
    pub lambda_hat: DVector<f64>,
    pub rz_hat: DMatrix<f64>,
    pub constraint_violation: f64,
    pub p_rz_hat: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ReplicationResult {
    pub method: Method,
    pub days: usize,
    pub replications: usize,
    /// Eigenvalue MSE and its variance across replications.
    pub mse: f64,
    pub mse_variance: f64,
    /// Entrywise MSE of the projected matrix.
    pub mse_entrywise: f64,
    pub mse_entrywise_variance: f64,
    pub target: DVector<f64>,
    pub target_matrix: DMatrix<f64>,
    /// Replicate outcomes in replicate order.
    pub outcomes: Vec<ReplicateOutcome>,
}

impl ReplicationResult {
    /// Estimates of eigenvalue `k` across replications.
    pub fn component_samples(&self, k: usize) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.lambda_hat[k]).collect()
    }

    pub fn estimates(&self) -> Vec<DVector<f64>> {
        self.outcomes.iter().map(|o| o.lambda_hat.clone()).collect()
    }
}

/// Daily mean matrix implied by the configured truth. Under the
/// negative-binomial family the truth is the size matrix `ℳ`, so the mean
/// is `ℳ(1−p)/p`.
pub fn data_mean(config: &SimConfig) -> Result<OdMatrix> {
    match config.family {
        Family::Poisson => Ok(config.truth.clone()),
        Family::NegBin { p } => config.truth.scaled((1.0 - p) / p),
    }
}

/// Eigenvalues and matrix an estimator is scored against: sizes for the
/// negative-binomial likelihood, means otherwise.
pub fn target_eigenvalues(config: &SimConfig, method: Method) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let target = match (config.family, method) {
        (Family::NegBin { .. }, Method::MleConstrained) => config.truth.clone(),
        _ => data_mean(config)?,
    };
    let basis = spectral_decompose(&target)?;
    Ok((basis.values().clone(), target.into_entries()))
}

/// Survey matrix of replicate seed `seed` before symmetrization.
pub fn build_raw_survey(config: &SimConfig, seed: u64) -> Result<DMatrix<f64>> {
    let param = bias_survey(
        &config.truth,
        config.survey_scale,
        config.noise_level,
        config.noise_kind,
        derive_seed(seed, SURVEY_STREAM),
    )?;
    let raw = match config.survey_design {
        SurveyDesign::Parameter => param.into_entries(),
        SurveyDesign::Sampled => {
            let mut rng = rng_from_seed(derive_seed(seed, SURVEY_DRAW_STREAM));
            draw_day(param.entries(), Family::Poisson, &mut rng)
        }
    };
    Ok(raw)
}

/// Symmetrized survey matrix of replicate seed `seed`.
pub fn build_survey(config: &SimConfig, seed: u64) -> Result<OdMatrix> {
    symmetrize_with_ids(&build_raw_survey(config, seed)?, config.truth.station_ids().to_vec())
}

/// Margins of replicate seed `seed`, drawn from [`data_mean`].
pub fn build_observations(config: &SimConfig, seed: u64) -> Result<ObservationSet> {
    let mean = data_mean(config)?;
    let mut rng = rng_from_seed(derive_seed(seed, DATA_STREAM));
    sample_observations(&mean, config.family, config.days, &mut rng)
}

/// Daily matrices of replicate seed `seed`; their margins equal
/// [`build_observations`] for the same seed.
pub fn build_daily_counts(config: &SimConfig, seed: u64) -> Result<Vec<OdMatrix>> {
    let mean = data_mean(config)?;
    let mut rng = rng_from_seed(derive_seed(seed, DATA_STREAM));
    (0..config.days)
        .map(|_| OdMatrix::new(mean.station_ids().to_vec(), draw_day(mean.entries(), config.family, &mut rng)))
        .collect()
}

fn likelihood_for(family: Family) -> LikelihoodFamily {
    match family {
        Family::Poisson => LikelihoodFamily::Poisson,
        Family::NegBin { .. } => LikelihoodFamily::NegBin,
    }
}

/// Replicate `index`: survey, eigenbasis, daily margins, estimate.
pub fn run_replicate(config: &SimConfig, method: Method, index: usize) -> Result<ReplicateOutcome> {
    let seed = replicate_seed(config.seed, index);
    let survey = build_survey(config, seed)?;
    let basis = spectral_decompose(&survey)?;
    let obs = build_observations(config, seed)?;
    let report = estimate(method, &basis, &obs, likelihood_for(config.family))?;
    Ok(ReplicateOutcome {
        lambda_hat: report.lambda_hat,
        rz_hat: report.rz_hat.into_entries(),
        constraint_violation: report.constraint_violation,
        p_rz_hat: report.p_rz_hat,
    })
}

/// Generate, estimate and score `replications` independent replicates.
/// Replicates run on the current rayon pool and are reduced in index
/// order, so the result depends only on the configuration.
pub fn replicate_experiment(config: &SimConfig, method: Method, replications: usize) -> Result<ReplicationResult> {
    config.validate()?;
    if replications == 0 {
        return Err(OdError::param("replications", "must be at least 1"));
    }
    let (target, target_matrix) = target_eigenvalues(config, method)?;
    let outcomes: Vec<ReplicateOutcome> = (0..replications)
        .into_par_iter()
        .map(|i| run_replicate(config, method, i))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;
    let n = target.len() as f64;
    let eig: Vec<f64> = outcomes
        .iter()
        .map(|o| (&o.lambda_hat - &target).norm_squared() / n)
        .collect();
    let ent: Vec<f64> = outcomes
        .iter()
        .map(|o| (&o.rz_hat - &target_matrix).norm_squared() / (n * n))
        .collect();
    let (mse, mse_variance) = mean_and_variance(&eig);
    let (mse_entrywise, mse_entrywise_variance) = mean_and_variance(&ent);
    Ok(ReplicationResult {
        method,
        days: config.days,
        replications,
        mse,
        mse_variance,
        mse_entrywise,
        mse_entrywise_variance,
        target,
        target_matrix,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference_matrix;

    fn config(days: usize, seed: u64) -> SimConfig {
        SimConfig::new(reference_matrix(), days, Family::Poisson, seed)
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let c = config(20, 17);
        let a = replicate_experiment(&c, Method::Gaussian, 3).unwrap();
        let b = replicate_experiment(&c, Method::Gaussian, 3).unwrap();
        assert_eq!(a.mse, b.mse);
        assert_eq!(a.estimates(), b.estimates());
        let one = replicate_experiment(&c, Method::MleConstrained, 1).unwrap();
        let again = replicate_experiment(&c, Method::MleConstrained, 1).unwrap();
        assert_eq!(one.estimates(), again.estimates());
    }

    #[test]
    fn replicate_matches_direct_run() {
        let c = config(15, 3);
        let r = replicate_experiment(&c, Method::Adhoc, 4).unwrap();
        let direct = run_replicate(&c, Method::Adhoc, 2).unwrap();
        assert_eq!(r.outcomes[2].lambda_hat, direct.lambda_hat);
    }

    #[test]
    fn daily_counts_share_the_margin_stream() {
        let mut c = config(6, 11);
        c.family = Family::NegBin { p: 0.5 };
        let days = build_daily_counts(&c, 4).unwrap();
        let from_days = ObservationSet::from_days(&days).unwrap();
        let obs = build_observations(&c, 4).unwrap();
        assert_eq!(from_days.departures(), obs.departures());
        assert_eq!(from_days.arrivals(), obs.arrivals());
    }

    #[test]
    fn unbiased_survey_keeps_true_basis() {
        let c = config(5, 0);
        let s = build_survey(&c, 0).unwrap();
        let scaled = reference_matrix().scaled(c.survey_scale).unwrap();
        assert!((s.entries() - scaled.entries()).amax() < 1e-12);
    }

    #[test]
    fn negbin_targets_depend_on_method() {
        let mut c = config(5, 0);
        c.family = Family::NegBin { p: 0.8 };
        let (size, _) = target_eigenvalues(&c, Method::MleConstrained).unwrap();
        let (mean, _) = target_eigenvalues(&c, Method::Gaussian).unwrap();
        for k in 0..5 {
            assert!((mean[k] - size[k] * 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn gaussian_error_shrinks_like_inverse_days() {
        let short = replicate_experiment(&config(50, 1), Method::Gaussian, 200).unwrap();
        let long = replicate_experiment(&config(5000, 1), Method::Gaussian, 200).unwrap();
        let slope = (long.mse / short.mse).ln() / 100f64.ln();
        assert!((-1.3..=-0.7).contains(&slope), "slope {slope}");
    }

    #[test]
    fn zero_replications_rejected() {
        assert!(replicate_experiment(&config(5, 0), Method::Gaussian, 0).is_err());
    }
}
