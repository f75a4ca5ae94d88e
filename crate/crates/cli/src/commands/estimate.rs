use std::collections::BTreeMap;
use std::path::PathBuf;

use odest::data::load_barrier_counts;
use serde_json::{json, Map};

use super::{load_matrix, parse_method, run_estimator, survey_basis, write_products};
use crate::error::{CliError, InputContext};
use crate::manifest::RunDir;
use crate::{FamilyArg, Global};

pub struct EstimateArgs {
    pub survey: PathBuf,
    pub counts: PathBuf,
    pub method: String,
    pub family: FamilyArg,
    pub truth: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
}

pub fn run(global: &Global, args: &EstimateArgs) -> Result<(), CliError> {
    let method = parse_method(&args.method)?;
    let survey = load_matrix(&args.survey)?;
    let counts = load_barrier_counts(&args.counts, Some(survey.station_ids())).input(&args.counts)?;
    let truth = args.truth.as_deref().map(load_matrix).transpose()?;
    let basis = survey_basis(&survey)?;
    let obs = &counts.observations;
    let (report, effects) = run_estimator(
        method,
        &basis,
        obs,
        args.family,
        args.covariates.as_deref().map(|p| (p, counts.dates.as_slice())),
    )?;
    let report = report.with_station_ids(survey.station_ids().to_vec())?;

    let mut extra = Map::new();
    extra.insert("survey_total".into(), json!(survey.total()));
    extra.insert(
        "imbalances".into(),
        json!(counts
            .imbalances
            .iter()
            .map(|d| json!({ "date": d.date.to_string(), "delta": d.delta }))
            .collect::<Vec<_>>()),
    );
    let mut dir = RunDir::create(&global.out, global.force)?;
    write_products(&mut dir, global, &report, &effects, obs, truth.as_ref(), extra)?;

    let mut config = BTreeMap::new();
    config.insert("method".to_string(), method.as_str().to_string());
    config.insert("family".to_string(), format!("{:?}", args.family).to_lowercase());
    config.insert("format".to_string(), format!("{:?}", global.format).to_lowercase());
    let mut inputs = vec![args.survey.clone(), args.counts.clone()];
    inputs.extend(args.truth.iter().cloned());
    inputs.extend(args.covariates.iter().cloned());
    dir.commit("estimate", global.seed.unwrap_or(0), config, &inputs)?;
    Ok(())
}
