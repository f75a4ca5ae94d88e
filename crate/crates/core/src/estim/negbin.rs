use std::collections::BTreeMap;

use statrs::function::gamma::ln_gamma;

use crate::error::{OdError, Result};
use crate::sim::NbParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFlag {
    NegBin,
    /// Sample variance does not exceed the mean; no evidence of
    /// over-dispersion, so the Poisson mean is reported instead.
    PoissonFallback,
    /// All samples are zero.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegBinFit {
    pub flag: FitFlag,
    pub params: Option<NbParams>,
    pub mean: f64,
    pub variance: f64,
    pub loglik: f64,
}

/// Maximum-likelihood `(r, p)` for i.i.d. negative-binomial counts.
///
/// For fixed `r` the likelihood is maximized by `p = r/(r + x̄)`, so the
/// search is one-dimensional over `log r`: a coarse grid followed by
/// golden-section refinement.
pub fn fit_negbin(samples: &[f64]) -> Result<NegBinFit> {
    if samples.len() < 2 {
        return Err(OdError::param("samples", "at least two samples are required"));
    }
    if samples.iter().any(|x| !x.is_finite() || *x < 0.0 || x.fract() != 0.0) {
        return Err(OdError::param("samples", "counts must be nonnegative integers"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let variance = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if mean == 0.0 {
        return Ok(NegBinFit {
            flag: FitFlag::Degenerate,
            params: None,
            mean,
            variance,
            loglik: 0.0,
        });
    }
    let hist = histogram(samples);
    if variance <= mean {
        let loglik = hist
            .iter()
            .map(|&(x, f)| f * (x * mean.ln() - mean - ln_gamma(x + 1.0)))
            .sum();
        return Ok(NegBinFit {
            flag: FitFlag::PoissonFallback,
            params: None,
            mean,
            variance,
            loglik,
        });
    }

    let profile = |log_r: f64| profile_loglik(&hist, n, mean, log_r.exp());
    let (lo, hi, steps) = (1e-4f64.ln(), 1e7f64.ln(), 240);
    let h = (hi - lo) / steps as f64;
    let mut best: usize = 0;
    let mut best_val = f64::NEG_INFINITY;
    for k in 0..=steps {
        let v = profile(lo + h * k as f64);
        if v > best_val {
            best_val = v;
            best = k;
        }
    }
    let a = lo + h * best.saturating_sub(1) as f64;
    let b = lo + h * (best + 1).min(steps) as f64;
    let log_r = golden_max(profile, a, b, 1e-10);
    let r = log_r.exp();
    let p = r / (r + mean);
    Ok(NegBinFit {
        flag: FitFlag::NegBin,
        params: Some(NbParams::new(r, p)?),
        mean,
        variance,
        loglik: profile(log_r),
    })
}

fn histogram(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut h: BTreeMap<u64, f64> = BTreeMap::new();
    for &x in samples {
        *h.entry(x as u64).or_default() += 1.0;
    }
    h.into_iter().map(|(x, f)| (x as f64, f)).collect()
}

fn profile_loglik(hist: &[(f64, f64)], n: f64, mean: f64, r: f64) -> f64 {
    let p = r / (r + mean);
    let lg_r = ln_gamma(r);
    let mut acc = n * r * p.ln() + n * mean * (1.0 - p).ln();
    for &(x, f) in hist {
        acc += f * (ln_gamma(x + r) - lg_r - ln_gamma(x + 1.0));
    }
    acc
}

pub(crate) fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{draw_day, rng_from_seed, Family};
    use nalgebra::DMatrix;

    #[test]
    fn constant_samples_fall_back_to_poisson() {
        let fit = fit_negbin(&[4.0; 50]).unwrap();
        assert_eq!(fit.flag, FitFlag::PoissonFallback);
        assert_eq!(fit.mean, 4.0);
        assert!(fit.params.is_none());
    }

    #[test]
    fn all_zero_is_degenerate() {
        assert_eq!(fit_negbin(&[0.0; 10]).unwrap().flag, FitFlag::Degenerate);
        assert!(fit_negbin(&[1.0]).is_err());
        assert!(fit_negbin(&[1.0, 2.5]).is_err());
    }

    #[test]
    fn recovers_size_of_generator() {
        // NB(r=5, p=0.4) has mean 7.5.
        let truth = DMatrix::from_row_slice(2, 2, &[0.0, 7.5, 0.0, 0.0]);
        let mut rng = rng_from_seed(404);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| draw_day(&truth, Family::NegBin { p: 0.4 }, &mut rng)[(0, 1)])
            .collect();
        let fit = fit_negbin(&xs).unwrap();
        assert_eq!(fit.flag, FitFlag::NegBin);
        let nb = fit.params.unwrap();
        assert!((nb.r() - 5.0).abs() < 0.5, "r = {}", nb.r());
        assert!((nb.mean() - fit.mean).abs() < 1e-6);
    }

    #[test]
    fn poisson_data_raises_fallback() {
        // Dispersion test: Poisson(70) draws have variance ≈ mean, and in
        // roughly half of samples the sample variance falls below the mean.
        let truth = DMatrix::from_row_slice(2, 2, &[0.0, 70.0, 0.0, 0.0]);
        let mut fallback = 0;
        for seed in 0..40 {
            let mut rng = rng_from_seed(seed);
            let xs: Vec<f64> = (0..2000)
                .map(|_| draw_day(&truth, Family::Poisson, &mut rng)[(0, 1)])
                .collect();
            let fit = fit_negbin(&xs).unwrap();
            match fit.flag {
                FitFlag::PoissonFallback => fallback += 1,
                FitFlag::NegBin => assert!(fit.params.unwrap().r() > 500.0),
                FitFlag::Degenerate => unreachable!(),
            }
        }
        assert!(fallback >= 10, "fallbacks {fallback}/40");
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let x = golden_max(|x| -(x - 1.3).powi(2), -5.0, 5.0, 1e-12);
        assert!((x - 1.3).abs() < 1e-8);
    }
}
