//! Replication harness, error accounting and normality diagnostics.

mod cvm;
mod regression;
mod replicate;
mod robustness;

pub use cvm::{cvm_normality, cvm_pvalue, cvm_statistic};
pub use regression::{replicate_regression, standard_design, RegressionExperiment, CoefficientMse};
pub use replicate::{
    build_daily_counts, build_observations, build_raw_survey, build_survey, data_mean, replicate_experiment, run_replicate, target_eigenvalues, ReplicateOutcome, ReplicationResult,
};
pub use robustness::{robustness_sweep, write_robustness_csv, RobustnessCell, RobustnessGrid};

use nalgebra::DVector;

use crate::error::{OdError, Result};

/// Mean over replications of the mean squared component error, and the
/// population variance of the per-replication errors.
pub fn mse(estimates: &[DVector<f64>], truth: &DVector<f64>) -> Result<(f64, f64)> {
    if estimates.is_empty() {
        return Err(OdError::param("estimates", "at least one estimate is required"));
    }
    let errs = estimates
        .iter()
        .map(|e| {
            if e.len() != truth.len() {
                return Err(OdError::Dimension(format!(
                    "estimate of length {} against truth of length {}",
                    e.len(),
                    truth.len()
                )));
            }
            Ok((e - truth).norm_squared() / truth.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_and_variance(&errs))
}

/// Mean and population variance.
pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn exact_estimates_have_zero_error() {
        let t = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        assert_eq!(mse(&[t.clone(), t.clone()], &t).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn unit_offset() {
        let t = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let e = t.add_scalar(1.0);
        assert_eq!(mse(&[e], &t).unwrap(), (1.0, 0.0));
        assert!(mse(&[], &t).is_err());
        assert!(mse(&[DVector::zeros(2)], &t).is_err());
    }

    #[test]
    fn matches_streaming_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let truth = DVector::from_fn(4, |i, _| i as f64);
        let est: Vec<DVector<f64>> = (0..100)
            .map(|_| DVector::from_fn(4, |_, _| rng.random_range(-5.0..5.0)))
            .collect();
        let (m, v) = mse(&est, &truth).unwrap();
        // Welford.
        let (mut count, mut mean, mut m2) = (0.0, 0.0, 0.0);
        for e in &est {
            let x: f64 = e.iter().zip(truth.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 4.0;
            count += 1.0;
            let d = x - mean;
            mean += d / count;
            m2 += d * (x - mean);
        }
        assert!((m - mean).abs() < 1e-10);
        assert!((v - m2 / count).abs() < 1e-9);
    }
}
