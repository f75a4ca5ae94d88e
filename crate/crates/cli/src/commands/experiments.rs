use std::path::Path;

use odest::estim::Method;
use odest::sim::{KvConfig, NoiseKind, SimConfig};
use odest::stats::{
    cvm_normality, mean_and_variance, replicate_experiment, robustness_sweep, write_robustness_csv, RobustnessGrid,
};
use serde_json::json;

use super::{config_dir, csv_bytes, json_bytes, kv_map, read_config, Cell, Table};
use crate::error::CliError;
use crate::manifest::RunDir;
use crate::plot::line_chart_svg;
use crate::{Format, Global};

pub const FULL_REPLICATIONS: usize = 2000;
pub const NORMALITY_DAYS: [usize; 4] = [10, 50, 500, 10_000];
pub const NORMALITY_REPLICATIONS: usize = 1000;

/// Sweep of survey bias: `robustness.csv` plus one MSE-against-η chart per
/// noise kind.
pub fn robustness(global: &Global, config_path: &Path, full: bool, replications: Option<usize>) -> Result<(), CliError> {
    let mut kv = read_config(config_path)?;
    let sim = SimConfig::from_kv(&kv, Some(&config_dir(config_path)))?;
    if full {
        kv.set("robustness.replications", FULL_REPLICATIONS);
    }
    if let Some(r) = replications {
        kv.set("robustness.replications", r);
    }
    if let Some(seed) = global.seed {
        kv.set("robustness.seed", seed);
    }
    let grid = RobustnessGrid::from_kv(&kv)?;
    let cells = robustness_sweep(&sim.truth, &grid)?;

    let mut dir = RunDir::create(&global.out, global.force)?;
    match global.format {
        Format::Csv => dir.write("robustness.csv", &csv_bytes(|b| write_robustness_csv(b, &cells))?)?,
        Format::Json => dir.write("robustness.json", &json_bytes(&json!(cells))?)?,
    }
    for &kind in &grid.noise_kinds {
        let mut series = Vec::new();
        for &method in &grid.methods {
            for &alpha in &grid.alphas {
                for &days in &grid.days {
                    let points: Vec<(f64, f64)> = cells
                        .iter()
                        .filter(|c| c.noise_kind == kind && c.method == method && c.alpha == alpha && c.days == days)
                        .map(|c| (c.eta, c.mse))
                        .collect();
                    let name = if grid.alphas.len() > 1 {
                        format!("{} T={days} a={alpha}", method.as_str())
                    } else {
                        format!("{} T={days}", method.as_str())
                    };
                    series.push((name, points));
                }
            }
        }
        let title = format!("Robustness to {} survey noise", kind.as_str());
        let svg = line_chart_svg(&title, "noise level", "MSE (log10)", &series, true);
        dir.write(&format!("robustness_{}.svg", kind.as_str()), svg.as_bytes())?;
    }
    dir.commit(
        "robustness",
        grid.seed,
        robustness_config(&kv, &grid),
        &[config_path.to_path_buf()],
    )?;
    Ok(())
}

fn robustness_config(kv: &KvConfig, grid: &RobustnessGrid) -> std::collections::BTreeMap<String, String> {
    let join = |v: Vec<String>| v.join(",");
    let mut m = kv_map(kv);
    m.insert("robustness.alphas".into(), join(grid.alphas.iter().map(f64::to_string).collect()));
    m.insert("robustness.etas".into(), join(grid.etas.iter().map(f64::to_string).collect()));
    m.insert("robustness.days".into(), join(grid.days.iter().map(usize::to_string).collect()));
    m.insert(
        "robustness.noise_kinds".into(),
        join(grid.noise_kinds.iter().map(|k: &NoiseKind| k.as_str().to_string()).collect()),
    );
    m.insert(
        "robustness.methods".into(),
        join(grid.methods.iter().map(|k| k.as_str().to_string()).collect()),
    );
    m.insert("robustness.replications".into(), grid.replications.to_string());
    m.insert("robustness.seed".into(), grid.seed.to_string());
    m
}

/// Per `T` and eigenvalue: mean, variance, `W²` and p-value of the
/// replicated estimates.
pub fn normality(global: &Global, config_path: &Path, replications: Option<usize>) -> Result<(), CliError> {
    let kv = read_config(config_path)?;
    let mut sim = SimConfig::from_kv(&kv, Some(&config_dir(config_path)))?;
    if let Some(seed) = global.seed {
        sim.seed = seed;
    }
    let days: Vec<usize> = kv.list("normality.days")?.unwrap_or_else(|| NORMALITY_DAYS.to_vec());
    if days.is_empty() || days.contains(&0) {
        return Err(odest::OdError::InvalidParameter {
            name: "normality.days".into(),
            reason: "needs positive day counts".into(),
        }
        .into());
    }
    let reps = match replications {
        Some(r) => r,
        None => kv.parsed_or("normality.replications", NORMALITY_REPLICATIONS)?,
    };
    let method: Method = kv.parsed_or("normality.method", Method::MleConstrained)?;

    let mut rows = Vec::new();
    let mut series: Vec<(String, Vec<(f64, f64)>)> = (0..sim.truth.n()).map(|k| (format!("lambda_{}", k + 1), Vec::new())).collect();
    for &t in &days {
        let cfg = SimConfig { days: t, ..sim.clone() };
        let result = replicate_experiment(&cfg, method, reps)?;
        for (k, s) in series.iter_mut().enumerate() {
            let samples = result.component_samples(k);
            let (mean, var) = mean_and_variance(&samples);
            let (w2, p) = cvm_normality(&samples)?;
            rows.push(vec![
                Cell::Int(t),
                Cell::Text(format!("lambda_{}", k + 1)),
                Cell::Num(result.target[k]),
                Cell::Num(mean),
                Cell::Num(var),
                Cell::Num(w2),
                Cell::Num(p),
            ]);
            s.1.push((t as f64, p));
        }
    }
    let table = Table {
        header: vec!["T", "component", "target", "mean", "variance", "W2", "p_value"],
        rows,
    };
    let mut dir = RunDir::create(&global.out, global.force)?;
    table.write(&mut dir, "normality", global.format)?;
    let log_series: Vec<(String, Vec<(f64, f64)>)> = series
        .into_iter()
        .map(|(n, pts)| (n, pts.into_iter().map(|(t, p)| (t.log10(), p)).collect()))
        .collect();
    let svg = line_chart_svg("Cramér–von Mises p-values", "log10 T", "p-value (log10)", &log_series, true);
    dir.write("normality.svg", svg.as_bytes())?;

    let mut config = kv_map(&sim.to_kv());
    config.insert("normality.days".into(), days.iter().map(usize::to_string).collect::<Vec<_>>().join(","));
    config.insert("normality.replications".into(), reps.to_string());
    config.insert("normality.method".into(), method.as_str().to_string());
    dir.commit("normality", sim.seed, config, &[config_path.to_path_buf()])?;
    Ok(())
}
