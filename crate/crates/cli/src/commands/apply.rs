use std::collections::BTreeMap;
use std::path::PathBuf;

use odest::data::{build_survey_od, load_barrier_counts, load_journeys, load_stations, DistanceMetric, TicketClass};
use odest::observation::{residual_margins, DEFAULT_CLAMP_FRACTION};
use odest::OdError;
use serde_json::{json, Map};

use super::{csv_bytes, load_matrix, parse_method, run_estimator, survey_basis, write_products};
use crate::error::{CliError, InputContext};
use crate::manifest::RunDir;
use crate::{FamilyArg, Global, MetricArg};

pub struct ApplyArgs {
    pub stations: PathBuf,
    pub journeys: PathBuf,
    pub barriers: PathBuf,
    pub method: String,
    pub known: Vec<PathBuf>,
    pub metric: MetricArg,
    pub family: FamilyArg,
    pub survey_class: Vec<String>,
    pub covariates: Option<PathBuf>,
}

/// Survey from nearest-station assignment, margins from barrier counts
/// minus any known components, then the chosen estimator.
pub fn run(global: &Global, args: &ApplyArgs) -> Result<(), CliError> {
    let method = parse_method(&args.method)?;
    let classes = args
        .survey_class
        .iter()
        .map(|c| c.parse::<TicketClass>())
        .collect::<odest::Result<Vec<_>>>()?;
    let metric = match args.metric {
        MetricArg::Haversine => DistanceMetric::Haversine,
        MetricArg::Euclidean => DistanceMetric::EuclideanDegrees,
    };
    let stations = load_stations(&args.stations).input(&args.stations)?;
    let ids: Vec<String> = stations.iter().map(|s| s.id.clone()).collect();
    let mut journeys = load_journeys(&args.journeys).input(&args.journeys)?;
    if !classes.is_empty() {
        journeys.retain(|j| classes.contains(&j.ticket_class));
    }
    if journeys.is_empty() {
        return Err(OdError::EstimationImpossible("no survey journeys remain after the ticket-class filter".into()).into());
    }
    let survey = build_survey_od(&journeys, &stations, metric).input(&args.journeys)?;
    let counts = load_barrier_counts(&args.barriers, Some(&ids)).input(&args.barriers)?;
    for d in &counts.imbalances {
        eprintln!("warning: {}: departures minus arrivals = {}", d.date, d.delta);
    }
    let known = args
        .known
        .iter()
        .map(|p| {
            let m = load_matrix(p)?;
            if m.station_ids() != ids.as_slice() {
                return Err(CliError::Input {
                    path: p.clone(),
                    source: OdError::DataInconsistency(format!(
                        "stations {:?} differ from the station file {:?}",
                        m.station_ids(),
                        ids
                    )),
                });
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let residual = residual_margins(&counts.observations, &known.iter().collect::<Vec<_>>(), DEFAULT_CLAMP_FRACTION)?;
    if residual.clamped > 0 {
        eprintln!("warning: {} station-days clamped at zero after removing known flows", residual.clamped);
    }
    let obs = &residual.observations;
    let basis = survey_basis(&survey.matrix)?;
    let (report, effects) = run_estimator(
        method,
        &basis,
        obs,
        args.family,
        args.covariates.as_deref().map(|p| (p, counts.dates.as_slice())),
    )?;
    let report = report.with_station_ids(ids.clone())?;

    let mut extra = Map::new();
    extra.insert(
        "survey".into(),
        json!({
            "counted": survey.counted,
            "dropped_same_station": survey.dropped_same_station,
        }),
    );
    extra.insert("clamped_station_days".into(), json!(residual.clamped));
    extra.insert(
        "imbalances".into(),
        json!(counts
            .imbalances
            .iter()
            .map(|d| json!({ "date": d.date.to_string(), "delta": d.delta }))
            .collect::<Vec<_>>()),
    );
    let mut dir = RunDir::create(&global.out, global.force)?;
    dir.write("survey_od.csv", &csv_bytes(|b| survey.matrix.write_csv(b))?)?;
    write_products(&mut dir, global, &report, &effects, obs, None, extra)?;

    let mut config = BTreeMap::new();
    config.insert("method".to_string(), method.as_str().to_string());
    config.insert("family".to_string(), format!("{:?}", args.family).to_lowercase());
    config.insert("metric".to_string(), format!("{:?}", args.metric).to_lowercase());
    config.insert("format".to_string(), format!("{:?}", global.format).to_lowercase());
    config.insert(
        "survey_class".to_string(),
        classes.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(","),
    );
    let mut inputs = vec![args.stations.clone(), args.journeys.clone(), args.barriers.clone()];
    inputs.extend(args.known.iter().cloned());
    inputs.extend(args.covariates.iter().cloned());
    dir.commit("apply", global.seed.unwrap_or(0), config, &inputs)?;
    Ok(())
}
