use std::path::Path;

use chrono::{Days, NaiveDate};
use odest::data::write_barrier_counts;
use odest::sim::{replicate_seed, SimConfig};
use odest::stats::{build_daily_counts, build_raw_survey};
use odest::{ObservationSet, OdMatrix};

use super::{config_dir, csv_bytes, kv_map, read_config};
use crate::error::CliError;
use crate::manifest::RunDir;
use crate::Global;

/// First calendar day of simulated barrier counts.
pub(crate) fn start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date")
}

/// Writes replicate 0 of the configured experiment: `truth.csv`,
/// `survey.csv` (unsymmetrized), `counts/day_NNN.csv`, `barriers.csv` and
/// the resolved configuration `config.cfg`.
pub fn run(global: &Global, config_path: &Path) -> Result<(), CliError> {
    let kv = read_config(config_path)?;
    let mut config = SimConfig::from_kv(&kv, Some(&config_dir(config_path)))?;
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    let seed = replicate_seed(config.seed, 0);
    let ids = config.truth.station_ids().to_vec();
    let survey = OdMatrix::new(ids.clone(), build_raw_survey(&config, seed)?)?;
    let days = build_daily_counts(&config, seed)?;
    let base = ObservationSet::from_days(&days)?;
    let labels = (0..days.len())
        .map(|t| (start_date() + Days::new(t as u64)).format("%Y-%m-%d").to_string())
        .collect();
    let obs = ObservationSet::new(ids, labels, base.departures().clone(), base.arrivals().clone())?;

    let resolved = config.to_kv();
    let mut dir = RunDir::create(&global.out, global.force)?;
    dir.write("config.cfg", resolved.to_string().as_bytes())?;
    dir.write("truth.csv", &csv_bytes(|b| config.truth.write_csv(b))?)?;
    dir.write("survey.csv", &csv_bytes(|b| survey.write_csv(b))?)?;
    let width = days.len().to_string().len().max(3);
    for (t, day) in days.iter().enumerate() {
        dir.write(&format!("counts/day_{:0width$}.csv", t + 1), &csv_bytes(|b| day.write_csv(b))?)?;
    }
    dir.write("barriers.csv", &csv_bytes(|b| write_barrier_counts(b, &obs))?)?;
    dir.commit("simulate", config.seed, kv_map(&resolved), &[config_path.to_path_buf()])?;
    Ok(())
}
