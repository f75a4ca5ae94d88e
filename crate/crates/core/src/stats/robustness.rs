use std::io::Write;

use super::replicate_experiment;
use crate::error::{OdError, Result};
use crate::estim::Method;
use crate::matrix::{format_sig12, OdMatrix};
use crate::sim::{Family, KvConfig, NoiseKind, SimConfig, SurveyDesign};

/// Axes of a robustness sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessGrid {
    pub alphas: Vec<f64>,
    pub etas: Vec<f64>,
    pub days: Vec<usize>,
    pub noise_kinds: Vec<NoiseKind>,
    pub methods: Vec<Method>,
    pub replications: usize,
    pub seed: u64,
}

impl Default for RobustnessGrid {
    fn default() -> Self {
        Self {
            alphas: vec![1.0],
            etas: (0..=10).map(|k| k as f64 / 10.0).collect(),
            days: vec![30, 200, 300, 2000],
            noise_kinds: vec![NoiseKind::Absolute, NoiseKind::Proportional],
            methods: vec![Method::Gaussian, Method::Adhoc],
            replications: 200,
            seed: 0,
        }
    }
}

impl RobustnessGrid {
    /// Reads `robustness.{alphas,etas,days,noise_kinds,methods,replications,seed}`
    /// as comma-separated lists; absent keys keep their defaults.
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let d = Self::default();
        let grid = Self {
            alphas: kv.list("robustness.alphas")?.unwrap_or(d.alphas),
            etas: kv.list("robustness.etas")?.unwrap_or(d.etas),
            days: kv.list("robustness.days")?.unwrap_or(d.days),
            noise_kinds: kv.list("robustness.noise_kinds")?.unwrap_or(d.noise_kinds),
            methods: kv.list("robustness.methods")?.unwrap_or(d.methods),
            replications: kv.parsed_or("robustness.replications", d.replications)?,
            seed: kv.parsed_or("robustness.seed", d.seed)?,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, empty) in [
            ("robustness.alphas", self.alphas.is_empty()),
            ("robustness.etas", self.etas.is_empty()),
            ("robustness.days", self.days.is_empty()),
            ("robustness.noise_kinds", self.noise_kinds.is_empty()),
            ("robustness.methods", self.methods.is_empty()),
        ] {
            if empty {
                return Err(OdError::param(name, "needs at least one value"));
            }
        }
        if let Some(e) = self.etas.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(OdError::param("robustness.etas", format!("must lie in [0,1], got {e}")));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(OdError::param("robustness.alphas", format!("must lie in [0,1], got {a}")));
        }
        if self.days.contains(&0) {
            return Err(OdError::param("robustness.days", "must be at least 1"));
        }
        if self.replications == 0 {
            return Err(OdError::param("robustness.replications", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RobustnessCell {
    pub method: Method,
    pub noise_kind: NoiseKind,
    pub alpha: f64,
    pub eta: f64,
    pub days: usize,
    pub replications: usize,
    /// Entrywise MSE of the projected matrix.
    pub mse: f64,
    pub mse_var: f64,
    pub mse_eigen: f64,
    pub mse_eigen_var: f64,
}

/// Runs every `(noise_kind, alpha, eta, days, method)` cell. All methods in
/// a cell see the same surveys and daily counts.
pub fn robustness_sweep(truth: &OdMatrix, grid: &RobustnessGrid) -> Result<Vec<RobustnessCell>> {
    grid.validate()?;
    let mut cells = Vec::new();
    for &kind in &grid.noise_kinds {
        for &alpha in &grid.alphas {
            for &eta in &grid.etas {
                for &days in &grid.days {
                    let config = SimConfig {
                        truth: truth.clone(),
                        days,
                        family: Family::Poisson,
                        seed: grid.seed,
                        survey_scale: alpha,
                        noise_level: eta,
                        noise_kind: kind,
                        survey_design: SurveyDesign::Parameter,
                    };
                    for &method in &grid.methods {
                        let r = replicate_experiment(&config, method, grid.replications)?;
                        cells.push(RobustnessCell {
                            method,
                            noise_kind: kind,
                            alpha,
                            eta,
                            days,
                            replications: grid.replications,
                            mse: r.mse_entrywise,
                            mse_var: r.mse_entrywise_variance,
                            mse_eigen: r.mse,
                            mse_eigen_var: r.mse_variance,
                        });
                    }
                }
            }
        }
    }
    Ok(cells)
}

/// One row per cell: `method,noise_kind,alpha,eta,T,replications,mse,mse_var`.
pub fn write_robustness_csv<W: Write>(writer: W, cells: &[RobustnessCell]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["method", "noise_kind", "alpha", "eta", "T", "replications", "mse", "mse_var"])?;
    for c in cells {
        w.write_record([
            c.method.as_str().to_string(),
            c.noise_kind.as_str().to_string(),
            format_sig12(c.alpha),
            format_sig12(c.eta),
            c.days.to_string(),
            c.replications.to_string(),
            format_sig12(c.mse),
            format_sig12(c.mse_var),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference_matrix;

    fn small_grid(etas: Vec<f64>) -> RobustnessGrid {
        RobustnessGrid {
            alphas: vec![1.0],
            etas,
            days: vec![30],
            noise_kinds: vec![NoiseKind::Absolute, NoiseKind::Proportional],
            methods: vec![Method::Gaussian, Method::Adhoc],
            replications: 10,
            seed: 4,
        }
    }

    #[test]
    fn zero_noise_matches_unbiased_baseline() {
        let cells = robustness_sweep(&reference_matrix(), &small_grid(vec![0.0])).unwrap();
        assert_eq!(cells.len(), 4);
        let base = SimConfig {
            survey_scale: 1.0,
            ..SimConfig::new(reference_matrix(), 30, Family::Poisson, 4)
        };
        for c in &cells {
            let r = replicate_experiment(&base, c.method, 10).unwrap();
            assert_eq!(c.mse, r.mse_entrywise);
        }
        // Noise kind is irrelevant without noise.
        assert_eq!(cells[0].mse, cells[2].mse);
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let cells = robustness_sweep(&reference_matrix(), &small_grid(vec![0.0, 0.5])).unwrap();
        let mut buf = Vec::new();
        write_robustness_csv(&mut buf, &cells).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "method,noise_kind,alpha,eta,T,replications,mse,mse_var");
        assert_eq!(lines.len(), 1 + 2 * 2 * 2);
        assert!(lines[1].starts_with("gaussian,absolute,1,0,30,10,"));
    }

    #[test]
    fn empty_axis_rejected() {
        let mut g = small_grid(vec![0.0]);
        g.methods.clear();
        assert!(robustness_sweep(&reference_matrix(), &g).is_err());
    }

    #[test]
    fn grid_from_kv() {
        let kv = KvConfig::parse("[robustness]\netas = 0.2, 0.5\nmethods = gaussian,mle\nreplications = 7\n").unwrap();
        let g = RobustnessGrid::from_kv(&kv).unwrap();
        assert_eq!(g.etas, vec![0.2, 0.5]);
        assert_eq!(g.methods, vec![Method::Gaussian, Method::MleConstrained]);
        assert_eq!(g.replications, 7);
        assert_eq!(g.days, RobustnessGrid::default().days);
        let bad = KvConfig::parse("robustness.etas = 2\n").unwrap();
        match RobustnessGrid::from_kv(&bad) {
            Err(OdError::InvalidParameter { name, .. }) => assert_eq!(name, "robustness.etas"),
            other => panic!("{other:?}"),
        }
    }
}
