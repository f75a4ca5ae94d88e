use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use super::{Family, NoiseKind};
use crate::error::{OdError, Result};
use crate::matrix::{read_matrix_csv, OdMatrix};

/// Flat `key = value` configuration. A `[section]` line prefixes the keys
/// that follow with `section.`; dotted keys may also be written in full.
/// `#` starts a comment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                OdError::param("config", format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(OdError::param("config", format!("line {}: empty key", lineno + 1)));
            }
            let full = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            entries.insert(full, value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| OdError::param(key, format!("cannot parse '{v}'"))),
        }
    }

    pub fn parsed_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse()
                        .map_err(|_| OdError::param(key, format!("cannot parse list item '{s}'")))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    /// Copies every entry of `other`, overwriting existing keys.
    pub fn merge(&mut self, other: &KvConfig) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }
}

impl fmt::Display for KvConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// How the survey matrix handed to the estimators is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurveyDesign {
    /// The (possibly biased) parameter matrix `αR_z + η·noise` itself.
    Parameter,
    /// An integer Poisson realization of that parameter matrix.
    Sampled,
}

/// One simulated experiment: truth, family, horizon, seed and survey model.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub truth: OdMatrix,
    pub days: usize,
    pub family: Family,
    pub seed: u64,
    pub survey_scale: f64,
    pub noise_level: f64,
    pub noise_kind: NoiseKind,
    pub survey_design: SurveyDesign,
}

/// Survey fraction of the simulation study.
pub const DEFAULT_SURVEY_SCALE: f64 = 1.0 / 6.0;

impl SimConfig {
    pub fn new(truth: OdMatrix, days: usize, family: Family, seed: u64) -> Self {
        Self {
            truth,
            days,
            family,
            seed,
            survey_scale: DEFAULT_SURVEY_SCALE,
            noise_level: 0.0,
            noise_kind: NoiseKind::Absolute,
            survey_design: SurveyDesign::Parameter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.days == 0 {
            return Err(OdError::param("sim.days", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.survey_scale) {
            return Err(OdError::param(
                "sim.survey_scale",
                format!("must lie in [0,1], got {}", self.survey_scale),
            ));
        }
        if !(0.0..=1.0).contains(&self.noise_level) {
            return Err(OdError::param(
                "sim.noise_level",
                format!("must lie in [0,1], got {}", self.noise_level),
            ));
        }
        self.family.validate()
    }

    /// Reads keys under `sim.`. `sim.truth` is `reference`, a matrix CSV
    /// path (relative to `base_dir`), or absent when inline rows
    /// `sim.truth.ids` / `sim.truth.row<i>` are given.
    pub fn from_kv(kv: &KvConfig, base_dir: Option<&Path>) -> Result<Self> {
        let truth = match kv.get("sim.truth") {
            Some("reference") => crate::reference_matrix(),
            Some(path) => {
                let p = match base_dir {
                    Some(d) => d.join(path),
                    None => Path::new(path).to_path_buf(),
                };
                let file = std::fs::File::open(&p)?;
                let (ids, m) = read_matrix_csv(file, &p.display().to_string())?;
                OdMatrix::new(ids, m)?
            }
            None if kv.get("sim.truth.ids").is_some() => inline_truth(kv)?,
            None => crate::reference_matrix(),
        };
        let family = match kv.get("sim.family").unwrap_or("poisson") {
            "poisson" => Family::Poisson,
            "negbin" => Family::NegBin {
                p: kv
                    .parsed("sim.negbin.p")?
                    .ok_or_else(|| OdError::param("sim.negbin.p", "required for negbin"))?,
            },
            other => {
                return Err(OdError::param(
                    "sim.family",
                    format!("expected poisson|negbin, got '{other}'"),
                ))
            }
        };
        let survey_design = match kv.get("sim.survey_design").unwrap_or("parameter") {
            "parameter" => SurveyDesign::Parameter,
            "sampled" => SurveyDesign::Sampled,
            other => {
                return Err(OdError::param(
                    "sim.survey_design",
                    format!("expected parameter|sampled, got '{other}'"),
                ))
            }
        };
        let cfg = Self {
            truth,
            days: kv.parsed_or("sim.days", 10)?,
            family,
            seed: kv.parsed_or("sim.seed", 0)?,
            survey_scale: kv.parsed_or("sim.survey_scale", DEFAULT_SURVEY_SCALE)?,
            noise_level: kv.parsed_or("sim.noise_level", 0.0)?,
            noise_kind: kv.parsed_or("sim.noise_kind", NoiseKind::Absolute)?,
            survey_design,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Self-contained flat serialization (truth written inline).
    pub fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::new();
        kv.set("sim.days", self.days);
        match self.family {
            Family::Poisson => kv.set("sim.family", "poisson"),
            Family::NegBin { p } => {
                kv.set("sim.family", "negbin");
                kv.set("sim.negbin.p", p.to_string());
            }
        }
        kv.set("sim.seed", self.seed);
        kv.set("sim.survey_scale", self.survey_scale.to_string());
        kv.set("sim.noise_level", self.noise_level.to_string());
        kv.set("sim.noise_kind", self.noise_kind.as_str());
        kv.set(
            "sim.survey_design",
            match self.survey_design {
                SurveyDesign::Parameter => "parameter",
                SurveyDesign::Sampled => "sampled",
            },
        );
        kv.set("sim.truth.ids", self.truth.station_ids().join(","));
        for i in 0..self.truth.n() {
            let row: Vec<String> = (0..self.truth.n())
                .map(|j| self.truth.get(i, j).to_string())
                .collect();
            kv.set(format!("sim.truth.row{}", i + 1), row.join(","));
        }
        kv
    }
}

fn inline_truth(kv: &KvConfig) -> Result<OdMatrix> {
    let ids: Vec<String> = kv
        .list::<String>("sim.truth.ids")?
        .ok_or_else(|| OdError::param("sim.truth.ids", "missing"))?;
    let n = ids.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let key = format!("sim.truth.row{}", i + 1);
        let row: Vec<f64> = kv
            .list(&key)?
            .ok_or_else(|| OdError::param(&key, "missing"))?;
        if row.len() != n {
            return Err(OdError::param(&key, format!("expected {n} values")));
        }
        for (j, v) in row.into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    OdMatrix::new(ids, m).map_err(|e| OdError::param("sim.truth", e.to_string()))
}
