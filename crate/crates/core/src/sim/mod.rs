//! Synthetic data generation: daily counts under Poisson, negative-binomial
//! and regression models, survey subsampling, and the two survey-bias
//! mechanisms used for robustness analysis.
//!
//! Every generator takes an explicit seed. Replicate `r` of an experiment
//! with master seed `s` uses seed `s + r`; independent streams inside one
//! replicate (survey versus daily counts) are separated with
//! [`derive_seed`].

mod config;
mod sample;

pub use config::{KvConfig, SimConfig, SurveyDesign, DEFAULT_SURVEY_SCALE};
pub use sample::{
    bias_survey, bias_survey_absolute, bias_survey_proportional, draw_day, sample_counts,
    sample_observations, sample_regression_counts, subsample_survey, RegressionSample,
    SampledCounts,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{OdError, Result};

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of replicate `index` under master seed `master`.
pub fn replicate_seed(master: u64, index: usize) -> u64 {
    master.wrapping_add(index as u64)
}

/// Splitmix64 finalizer over `seed ⊕ stream`, for independent sub-streams
/// of one replicate.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Negative-binomial `(r, p)` with mean `r(1−p)/p` and variance `mean/p`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NbParams {
    r: f64,
    p: f64,
}

impl NbParams {
    pub fn new(r: f64, p: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(OdError::param("r", format!("must be positive, got {r}")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(OdError::param("p", format!("must lie in (0,1), got {p}")));
        }
        Ok(Self { r, p })
    }

    /// Size parameter giving `mean` at success probability `p`.
    pub fn from_mean(mean: f64, p: f64) -> Result<Self> {
        Self::new(mean * p / (1.0 - p), p)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn mean(&self) -> f64 {
        self.r * (1.0 - self.p) / self.p
    }

    pub fn variance(&self) -> f64 {
        self.mean() / self.p
    }
}

/// Count distribution for daily OD entries. For `NegBin` the success
/// probability `p` is shared by every entry and each entry's size is solved
/// from its mean.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Poisson,
    NegBin { p: f64 },
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Family::Poisson => Ok(()),
            Family::NegBin { p } if p > 0.0 && p < 1.0 => Ok(()),
            Family::NegBin { p } => Err(OdError::param(
                "negbin.p",
                format!("must lie in (0,1), got {p}"),
            )),
        }
    }
}

/// Survey contamination model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Noise mean is the largest entry of `αR_z`, independent of the entry.
    Absolute,
    /// Noise mean at `(i,j)` is `αR_z[i][j]`.
    Proportional,
}

impl NoiseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseKind::Absolute => "absolute",
            NoiseKind::Proportional => "proportional",
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = OdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(NoiseKind::Absolute),
            "proportional" => Ok(NoiseKind::Proportional),
            other => Err(OdError::param(
                "noise_kind",
                format!("expected absolute|proportional, got '{other}'"),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nb_moments() {
        let nb = NbParams::from_mean(70.0, 0.5).unwrap();
        assert_eq!(nb.r(), 70.0);
        assert_eq!(nb.mean(), 70.0);
        assert_eq!(nb.variance(), 140.0);
        assert!(NbParams::new(0.0, 0.5).is_err());
        assert!(NbParams::new(1.0, 1.0).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(7, 0), derive_seed(7, 1));
        assert_eq!(derive_seed(7, 1), derive_seed(7, 1));
        assert_eq!(replicate_seed(u64::MAX, 1), 0);
    }
}
