use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};

use super::{rng_from_seed, Family, NoiseKind, SimRng};
use crate::error::{OdError, Result};
use crate::estim::CovariateDesign;
use crate::matrix::OdMatrix;
use crate::observation::ObservationSet;

/// Daily count matrices and their margins.
#[derive(Debug, Clone)]
pub struct SampledCounts {
    pub days: Vec<OdMatrix>,
    pub observations: ObservationSet,
}

pub(crate) fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng)
}

fn negbin<R: Rng + ?Sized>(rng: &mut R, mean: f64, p: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    // Gamma–Poisson mixture: size r = mean·p/(1−p), scale (1−p)/p.
    let r = mean * p / (1.0 - p);
    let rate = Gamma::new(r, (1.0 - p) / p)
        .expect("positive shape and scale")
        .sample(rng);
    poisson(rng, rate)
}

fn check_means(truth: &DMatrix<f64>) -> Result<()> {
    if truth.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(OdError::param("truth", "means must be finite and nonnegative"));
    }
    Ok(())
}

/// One day of counts: an independent draw for every off-diagonal entry.
/// Zero-mean entries are 0 and consume no randomness.
pub fn draw_day(truth: &DMatrix<f64>, family: Family, rng: &mut SimRng) -> DMatrix<f64> {
    let n = truth.nrows();
    let mut x = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mean = truth[(i, j)];
            x[(i, j)] = match family {
                Family::Poisson => poisson(rng, mean),
                Family::NegBin { p } => negbin(rng, mean, p),
            };
        }
    }
    x
}

/// `days` independent daily matrices drawn around `truth`.
pub fn sample_counts(truth: &OdMatrix, family: Family, days: usize, seed: u64) -> Result<SampledCounts> {
    family.validate()?;
    if days == 0 {
        return Err(OdError::param("days", "must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(days);
    for _ in 0..days {
        let x = draw_day(truth.entries(), family, &mut rng);
        out.push(OdMatrix::new(truth.station_ids().to_vec(), x)?);
    }
    let observations = ObservationSet::from_days(&out)?;
    Ok(SampledCounts {
        days: out,
        observations,
    })
}

/// Margins only, drawn from the same sequence as [`sample_counts`] would
/// produce with an RNG in the same state.
pub fn sample_observations(
    truth: &OdMatrix,
    family: Family,
    days: usize,
    rng: &mut SimRng,
) -> Result<ObservationSet> {
    family.validate()?;
    if days == 0 {
        return Err(OdError::param("days", "must be at least 1"));
    }
    let n = truth.n();
    let mut dep = DMatrix::zeros(days, n);
    let mut arr = DMatrix::zeros(days, n);
    for t in 0..days {
        let x = draw_day(truth.entries(), family, rng);
        for i in 0..n {
            for j in 0..n {
                dep[(t, i)] += x[(i, j)];
                arr[(t, j)] += x[(i, j)];
            }
        }
    }
    let labels = (0..days).map(|d| format!("day{}", d + 1)).collect();
    ObservationSet::new(truth.station_ids().to_vec(), labels, dep, arr)
}

/// Survey-scale subsample: entry `(i,j)` is `Poisson(π_ij·truth_ij)` with
/// `π_ij = clamp(π + jitter·Z_ij, 0, 1)` and `Z_ij` standard normal.
pub fn subsample_survey(truth: &OdMatrix, pi: f64, jitter: f64, seed: u64) -> Result<OdMatrix> {
    if !(pi > 0.0 && pi <= 1.0) {
        return Err(OdError::param("pi", format!("must lie in (0,1], got {pi}")));
    }
    if !(jitter.is_finite() && jitter >= 0.0) {
        return Err(OdError::param("jitter", "must be finite and nonnegative"));
    }
    let mut rng = rng_from_seed(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let n = truth.n();
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j || truth.get(i, j) == 0.0 {
                continue;
            }
            let rate = if jitter > 0.0 {
                (pi + jitter * normal.sample(&mut rng)).clamp(0.0, 1.0)
            } else {
                pi
            };
            s[(i, j)] = poisson(&mut rng, rate * truth.get(i, j));
        }
    }
    OdMatrix::new(truth.station_ids().to_vec(), s)
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(OdError::param(name, format!("must lie in [0,1], got {v}")));
    }
    Ok(())
}

/// `αR_z + η·Poisson(max(αR_z))`, an independent draw per off-diagonal
/// entry. The result is not symmetrized.
pub fn bias_survey_absolute(rz: &OdMatrix, alpha: f64, eta: f64, seed: u64) -> Result<OdMatrix> {
    bias_survey(rz, alpha, eta, NoiseKind::Absolute, seed)
}

/// `αR_z + η·Poisson(αR_z)` entrywise. The result is not symmetrized.
pub fn bias_survey_proportional(rz: &OdMatrix, alpha: f64, eta: f64, seed: u64) -> Result<OdMatrix> {
    bias_survey(rz, alpha, eta, NoiseKind::Proportional, seed)
}

pub fn bias_survey(
    rz: &OdMatrix,
    alpha: f64,
    eta: f64,
    kind: NoiseKind,
    seed: u64,
) -> Result<OdMatrix> {
    check_unit("alpha", alpha)?;
    check_unit("eta", eta)?;
    let base = rz.entries() * alpha;
    if eta == 0.0 {
        return OdMatrix::new(rz.station_ids().to_vec(), base);
    }
    let mut rng = rng_from_seed(seed);
    let peak = base.max();
    let n = rz.n();
    let mut out = base.clone();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mean = match kind {
                NoiseKind::Absolute => peak,
                NoiseKind::Proportional => base[(i, j)],
            };
            out[(i, j)] += eta * poisson(&mut rng, mean);
        }
    }
    OdMatrix::new(rz.station_ids().to_vec(), out)
}

/// Daily counts under the regression model together with the daily mean
/// matrices that generated them.
#[derive(Debug, Clone)]
pub struct RegressionSample {
    pub days: Vec<OdMatrix>,
    pub observations: ObservationSet,
}

/// Poisson counts with day-`t` mean `β0 + Σ_m β_m x_m^t`. `betas[m]` pairs
/// with design column `m + 1` (column 0 is the intercept).
pub fn sample_regression_counts(
    beta0: &OdMatrix,
    betas: &[DMatrix<f64>],
    design: &CovariateDesign,
    seed: u64,
) -> Result<RegressionSample> {
    let n = beta0.n();
    if betas.len() + 1 != design.covariates() {
        return Err(OdError::Dimension(format!(
            "{} coefficient matrices for a design with {} columns",
            betas.len(),
            design.covariates()
        )));
    }
    for b in betas {
        if b.shape() != (n, n) {
            return Err(OdError::Dimension(format!(
                "coefficient matrix {:?}, expected {n}x{n}",
                b.shape()
            )));
        }
    }
    check_means(beta0.entries())?;
    let x = design.matrix();
    let mut means = Vec::with_capacity(design.days());
    let mut negative_days = Vec::new();
    for t in 0..design.days() {
        let mut m = beta0.entries().clone();
        for (k, b) in betas.iter().enumerate() {
            m += b * x[(t, k + 1)];
        }
        m.fill_diagonal(0.0);
        if m.iter().any(|v| *v < -1e-12) {
            negative_days.push(t);
        }
        means.push(m);
    }
    if !negative_days.is_empty() {
        return Err(OdError::NegativeMean { days: negative_days });
    }
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(means.len());
    for m in &means {
        let m = m.map(|v| v.max(0.0));
        let day = draw_day(&m, Family::Poisson, &mut rng);
        out.push(OdMatrix::new(beta0.station_ids().to_vec(), day)?);
    }
    let observations = ObservationSet::from_days(&out)?;
    Ok(RegressionSample {
        days: out,
        observations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference_matrix;

    #[test]
    fn zero_mean_draws_zero() {
        let truth = OdMatrix::from_rows(&[vec![0.0, 0.0], vec![5.0, 0.0]]).unwrap();
        for fam in [Family::Poisson, Family::NegBin { p: 0.3 }] {
            let s = sample_counts(&truth, fam, 200, 1).unwrap();
            assert!(s.days.iter().all(|d| d.get(0, 1) == 0.0 && d.get(0, 0) == 0.0));
        }
    }

    #[test]
    fn margins_match_day_matrices() {
        let s = sample_counts(&reference_matrix(), Family::Poisson, 20, 3).unwrap();
        for (t, day) in s.days.iter().enumerate() {
            let (d, a) = day.margins();
            assert_eq!(s.observations.departures().row(t).transpose(), d);
            assert_eq!(s.observations.arrivals().row(t).transpose(), a);
        }
        assert!(s.observations.imbalances().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn margin_only_path_matches_full_sampler() {
        let truth = reference_matrix();
        let full = sample_counts(&truth, Family::NegBin { p: 0.4 }, 15, 11).unwrap();
        let mut rng = rng_from_seed(11);
        let obs = sample_observations(&truth, Family::NegBin { p: 0.4 }, 15, &mut rng).unwrap();
        assert_eq!(obs.departures(), full.observations.departures());
        assert_eq!(obs.arrivals(), full.observations.arrivals());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = sample_counts(&reference_matrix(), Family::Poisson, 5, 9).unwrap();
        let b = sample_counts(&reference_matrix(), Family::Poisson, 5, 9).unwrap();
        assert_eq!(a.days, b.days);
        let c = sample_counts(&reference_matrix(), Family::Poisson, 5, 10).unwrap();
        assert_ne!(a.days, c.days);
    }

    #[test]
    fn poisson_sample_means_within_clt_band() {
        let truth = reference_matrix();
        let t = 10_000;
        let s = sample_counts(&truth, Family::Poisson, t, 2024).unwrap();
        let mut inside = 0;
        let mut total = 0;
        for i in 0..5 {
            for j in 0..5 {
                if i == j {
                    continue;
                }
                let mean = s.days.iter().map(|d| d.get(i, j)).sum::<f64>() / t as f64;
                let m = truth.get(i, j);
                total += 1;
                if (mean - m).abs() <= 3.0 * (m / t as f64).sqrt() {
                    inside += 1;
                }
            }
        }
        assert!(inside as f64 >= 0.95 * total as f64, "{inside}/{total}");
    }

    #[test]
    fn negbin_variance_is_mean_over_p() {
        let truth = OdMatrix::from_rows(&[vec![0.0, 70.0], vec![0.0, 0.0]]).unwrap();
        let s = sample_counts(&truth, Family::NegBin { p: 0.5 }, 10_000, 77).unwrap();
        let xs: Vec<f64> = s.days.iter().map(|d| d.get(0, 1)).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((var - 140.0).abs() < 14.0, "variance {var}");
    }

    #[test]
    fn invalid_family_rejected() {
        assert!(sample_counts(&reference_matrix(), Family::NegBin { p: 1.5 }, 3, 0).is_err());
        assert!(sample_counts(&reference_matrix(), Family::Poisson, 0, 0).is_err());
    }

    #[test]
    fn full_subsample_is_unbiased() {
        let truth = reference_matrix();
        let reps = 2000;
        let mut acc = DMatrix::zeros(5, 5);
        for r in 0..reps {
            acc += subsample_survey(&truth, 1.0, 0.0, r).unwrap().entries();
        }
        let mean = acc / reps as f64;
        for i in 0..5 {
            for j in 0..5 {
                let m = truth.get(i, j);
                assert!((mean[(i, j)] - m).abs() <= 4.0 * (m / reps as f64).sqrt() + 1e-12);
            }
        }
    }

    #[test]
    fn one_sixth_subsample_has_survey_magnitudes() {
        let s = subsample_survey(&reference_matrix(), 1.0 / 6.0, 0.0, 5).unwrap();
        assert!(s.entries().iter().all(|v| v.fract() == 0.0));
        // Means range 11/6..95/6; realizations should sit well under 40.
        assert!(s.entries().max() < 40.0 && s.total() > 50.0 && s.total() < 260.0);
        let zero = OdMatrix::zeros(crate::matrix::default_ids(3));
        assert_eq!(subsample_survey(&zero, 1.0 / 6.0, 0.1, 1).unwrap().total(), 0.0);
        assert!(subsample_survey(&zero, 0.0, 0.0, 1).is_err());
    }

    #[test]
    fn bias_without_noise_is_scaling() {
        let rz = reference_matrix();
        for kind in [NoiseKind::Absolute, NoiseKind::Proportional] {
            let b = bias_survey(&rz, 0.4, 0.0, kind, 3).unwrap();
            assert_eq!(b.entries(), &(rz.entries() * 0.4));
        }
        let z = bias_survey_absolute(&rz, 0.0, 0.7, 3).unwrap();
        assert_eq!(z.total(), 0.0);
        assert!(bias_survey_absolute(&rz, 1.2, 0.0, 3).is_err());
        assert!(bias_survey_proportional(&rz, 0.5, -0.1, 3).is_err());
    }

    #[test]
    fn absolute_noise_mean_is_peak_entry() {
        let rz = reference_matrix();
        let reps = 400;
        let mut acc = 0.0;
        for r in 0..reps {
            let b = bias_survey_absolute(&rz, 1.0, 1.0, r).unwrap();
            acc += (b.entries() - rz.entries()).sum() / 20.0;
        }
        let mean_noise = acc / reps as f64;
        // sd of the per-replicate mean of 20 Poisson(95) draws is sqrt(95/20).
        assert!((mean_noise - 95.0).abs() < 4.0 * (95.0f64 / 20.0 / reps as f64).sqrt());
    }

    #[test]
    fn proportional_noise_mean_scales_truth() {
        let rz = reference_matrix();
        let (alpha, eta) = (0.5, 0.6);
        let reps = 3000;
        let mut acc = DMatrix::zeros(5, 5);
        for r in 0..reps {
            acc += bias_survey_proportional(&rz, alpha, eta, r).unwrap().entries();
        }
        let mean = acc / reps as f64;
        for i in 0..5 {
            for j in 0..5 {
                let m = rz.get(i, j);
                let expected = alpha * m * (1.0 + eta);
                let sd = eta * (alpha * m / reps as f64).sqrt();
                assert!((mean[(i, j)] - expected).abs() <= 4.0 * sd + 1e-12);
            }
        }
        let zero_stays = OdMatrix::from_rows(&[vec![0.0, 0.0], vec![3.0, 0.0]]).unwrap();
        for r in 0..50 {
            assert_eq!(bias_survey_proportional(&zero_stays, 1.0, 1.0, r).unwrap().get(0, 1), 0.0);
        }
    }

    fn design(cols: Vec<Vec<f64>>) -> CovariateDesign {
        let t = cols[0].len();
        let x = DMatrix::from_fn(t, cols.len(), |r, c| cols[c][r]);
        CovariateDesign::new(x, (0..cols.len()).map(|c| format!("x{c}")).collect()).unwrap()
    }

    #[test]
    fn regression_without_covariates_matches_poisson_sampler() {
        let truth = reference_matrix();
        let d = design(vec![vec![1.0; 8]]);
        let reg = sample_regression_counts(&truth, &[], &d, 31).unwrap();
        let plain = sample_counts(&truth, Family::Poisson, 8, 31).unwrap();
        assert_eq!(reg.days, plain.days);
    }

    #[test]
    fn binary_covariate_shifts_day_means_by_beta() {
        let beta0 = OdMatrix::from_rows(&[vec![0.0, 20.0], vec![20.0, 0.0]]).unwrap();
        let beta1 = DMatrix::from_row_slice(2, 2, &[0.0, 15.0, 15.0, 0.0]);
        let t = 6000;
        let x1: Vec<f64> = (0..t).map(|i| (i % 2) as f64).collect();
        let d = design(vec![vec![1.0; t], x1.clone()]);
        let s = sample_regression_counts(&beta0, &[beta1], &d, 8).unwrap();
        let mut on = (0.0, 0.0);
        let mut off = (0.0, 0.0);
        for (day, x) in s.days.iter().zip(&x1) {
            let acc = if *x > 0.5 { &mut on } else { &mut off };
            acc.0 += day.get(0, 1);
            acc.1 += 1.0;
        }
        let diff = on.0 / on.1 - off.0 / off.1;
        // sd of the difference: sqrt(35/3000 + 20/3000).
        assert!((diff - 15.0).abs() < 4.0 * (55.0f64 / 3000.0).sqrt(), "diff {diff}");
    }

    #[test]
    fn regression_negative_means_name_days() {
        let beta0 = OdMatrix::from_rows(&[vec![0.0, 5.0], vec![5.0, 0.0]]).unwrap();
        let beta1 = DMatrix::from_row_slice(2, 2, &[0.0, -10.0, -10.0, 0.0]);
        let d = design(vec![vec![1.0; 4], vec![0.0, 1.0, 0.0, 1.0]]);
        match sample_regression_counts(&beta0, &[beta1], &d, 1) {
            Err(OdError::NegativeMean { days }) => assert_eq!(days, vec![1, 3]),
            other => panic!("{other:?}"),
        }
    }
}
