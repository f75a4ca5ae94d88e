mod apply;
mod estimate;
mod experiments;
mod simulate;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use odest::data::load_covariates;
use odest::estim::{
    estimate, estimate_lambda_regression, CovariateDesign, EstimatorReport, LikelihoodFamily, Method,
};
use odest::matrix::{format_sig12, read_matrix_csv, write_matrix_csv};
use odest::sim::KvConfig;
use odest::spectral::spectral_decompose;
use odest::{OdError, OdMatrix, ObservationSet, SpectralForm};
use serde_json::{json, Map, Value};

use crate::error::{CliError, InputContext};
use crate::manifest::RunDir;
use crate::plot::{bar_chart_svg, heatmap_svg};
use crate::{Command, FamilyArg, Format, Global};

pub fn dispatch(global: &Global, command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate { config } => simulate::run(global, &config),
        Command::Estimate {
            survey,
            counts,
            method,
            family,
            truth,
            covariates,
        } => estimate::run(
            global,
            &estimate::EstimateArgs {
                survey,
                counts,
                method,
                family,
                truth,
                covariates,
            },
        ),
        Command::Robustness {
            config,
            full,
            replications,
        } => experiments::robustness(global, &config, full, replications),
        Command::Normality { config, replications } => experiments::normality(global, &config, replications),
        Command::Apply {
            stations,
            journeys,
            barriers,
            method,
            known,
            metric,
            family,
            survey_class,
            covariates,
        } => apply::run(
            global,
            &apply::ApplyArgs {
                stations,
                journeys,
                barriers,
                method,
                known,
                metric,
                family,
                survey_class,
                covariates,
            },
        ),
    }
}

pub(crate) fn read_config(path: &Path) -> Result<KvConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        source: OdError::Io(e),
    })?;
    KvConfig::parse(&text).map_err(CliError::from)
}

pub(crate) fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub(crate) fn kv_map(kv: &KvConfig) -> BTreeMap<String, String> {
    kv.keys().map(|k| (k.to_string(), kv.get(k).unwrap_or_default().to_string())).collect()
}

pub(crate) fn load_matrix(path: &Path) -> Result<OdMatrix, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        source: OdError::Io(e),
    })?;
    let (ids, m) = read_matrix_csv(file, &path.display().to_string()).input(path)?;
    OdMatrix::new(ids, m).input(path)
}

pub(crate) fn parse_method(name: &str) -> Result<Method, CliError> {
    name.parse::<Method>().map_err(CliError::from)
}

pub(crate) fn likelihood(family: FamilyArg) -> LikelihoodFamily {
    match family {
        FamilyArg::Poisson => LikelihoodFamily::Poisson,
        FamilyArg::Negbin => LikelihoodFamily::NegBin,
    }
}

pub(crate) fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> odest::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

pub(crate) fn vec_json(v: &DVector<f64>) -> Value {
    json!(v.iter().collect::<Vec<_>>())
}

/// Survey basis after symmetrization; an empty survey cannot carry any
/// structure.
pub(crate) fn survey_basis(survey: &OdMatrix) -> Result<SpectralForm, CliError> {
    if survey.total() <= 0.0 {
        return Err(OdError::EstimationImpossible("the survey matrix has no journeys between distinct stations".into()).into());
    }
    let sym = odest::matrix::symmetrize_with_ids(survey.entries(), survey.station_ids().to_vec())?;
    Ok(spectral_decompose(&sym)?)
}

/// Runs `method`; with covariates the regression estimator uses them and
/// the effects come back alongside the intercept report.
pub(crate) fn run_estimator(
    method: Method,
    basis: &SpectralForm,
    obs: &ObservationSet,
    family: FamilyArg,
    covariates: Option<(&Path, &[chrono::NaiveDate])>,
) -> Result<(EstimatorReport, Vec<(String, DVector<f64>, DMatrix<f64>)>), CliError> {
    match (method, covariates) {
        (Method::Regression, Some((path, dates))) => {
            let cov = load_covariates(path, dates).input(path)?;
            let labels: Vec<&str> = cov.labels.iter().map(String::as_str).collect();
            let design = CovariateDesign::with_intercept(&cov.values, &labels)?;
            let est = estimate_lambda_regression(basis, obs, &design)?;
            let effects = est.effects.into_iter().map(|e| (e.label, e.lambda_hat, e.matrix)).collect();
            Ok((est.intercept, effects))
        }
        (_, Some((path, _))) => Err(CliError::Usage(format!(
            "--covariates {} is only used by the regression method",
            path.display()
        ))),
        _ => Ok((estimate(method, basis, obs, likelihood(family))?, Vec::new())),
    }
}

pub(crate) enum Cell {
    Text(String),
    Int(usize),
    Num(f64),
}

pub(crate) struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn bytes(&self, format: Format) -> Result<Vec<u8>, CliError> {
        match format {
            Format::Csv => {
                let mut out = self.header.join(",");
                out.push('\n');
                for row in &self.rows {
                    let fields: Vec<String> = row
                        .iter()
                        .map(|c| match c {
                            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
                            Cell::Text(s) => s.clone(),
                            Cell::Int(v) => v.to_string(),
                            Cell::Num(v) => format_sig12(*v),
                        })
                        .collect();
                    out.push_str(&fields.join(","));
                    out.push('\n');
                }
                Ok(out.into_bytes())
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let mut m = Map::new();
                        for (h, c) in self.header.iter().zip(row) {
                            let v = match c {
                                Cell::Text(s) => json!(s),
                                Cell::Int(v) => json!(v),
                                Cell::Num(v) => json!(v),
                            };
                            m.insert(h.to_string(), v);
                        }
                        Value::Object(m)
                    })
                    .collect();
                json_bytes(&Value::Array(rows))
            }
        }
    }

    pub fn write(&self, dir: &mut RunDir, stem: &str, format: Format) -> Result<(), CliError> {
        let ext = match format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        dir.write(&format!("{stem}.{ext}"), &self.bytes(format)?)
    }
}

pub(crate) fn json_bytes(v: &Value) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(std::io::Error::other)?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Entrywise and eigenvalue MSE of `estimate` against `truth`.
pub(crate) fn score(report: &EstimatorReport, truth: &OdMatrix) -> Result<(f64, f64), CliError> {
    if truth.station_ids() != report.rz_hat.station_ids() {
        return Err(OdError::DataInconsistency(format!(
            "truth stations {:?} differ from estimate stations {:?}",
            truth.station_ids(),
            report.rz_hat.station_ids()
        ))
        .into());
    }
    let n = truth.n() as f64;
    let entry = (report.rz_hat.entries() - truth.entries()).norm_squared() / (n * n);
    let values = spectral_decompose(truth)?.values().clone();
    let eig = (&report.lambda_hat - values).norm_squared() / n;
    Ok((entry, eig))
}

/// `report.json`, `rz_hat.csv`, the margin table, `heatmap.svg` and
/// `margins.svg`.
pub(crate) fn write_products(
    dir: &mut RunDir,
    global: &Global,
    report: &EstimatorReport,
    effects: &[(String, DVector<f64>, DMatrix<f64>)],
    obs: &ObservationSet,
    truth: Option<&OdMatrix>,
    extra: Map<String, Value>,
) -> Result<(), CliError> {
    let ids = report.rz_hat.station_ids().to_vec();
    let (exp_dep, exp_arr) = report.expected_margins();
    let (obs_dep, obs_arr) = (obs.mean_departures(), obs.mean_arrivals());
    let mut json = report.to_json();
    let obj = json.as_object_mut().expect("report serializes to an object");
    obj.insert("days".into(), json!(obs.days()));
    obj.insert("expected_departures".into(), vec_json(&exp_dep));
    obj.insert("expected_arrivals".into(), vec_json(&exp_arr));
    if let Some(t) = truth {
        let (mse, mse_eigen) = score(report, t)?;
        obj.insert("mse".into(), json!(mse));
        obj.insert("mse_eigen".into(), json!(mse_eigen));
    }
    if !effects.is_empty() {
        let list: Vec<Value> = effects
            .iter()
            .map(|(label, lambda, _)| json!({ "label": label, "lambda_hat": vec_json(lambda), "matrix": format!("beta_{label}.csv") }))
            .collect();
        obj.insert("effects".into(), Value::Array(list));
    }
    obj.extend(extra);
    dir.write("report.json", &json_bytes(&json)?)?;
    dir.write("rz_hat.csv", &csv_bytes(|b| report.write_matrix_csv(b))?)?;
    for (label, _, m) in effects {
        dir.write(&format!("beta_{label}.csv"), &csv_bytes(|b| write_matrix_csv(b, &ids, m))?)?;
    }
    let table = Table {
        header: vec![
            "station_id",
            "expected_departures",
            "expected_arrivals",
            "observed_mean_departures",
            "observed_mean_arrivals",
        ],
        rows: ids
            .iter()
            .enumerate()
            .map(|(i, id)| {
                vec![
                    Cell::Text(id.clone()),
                    Cell::Num(exp_dep[i]),
                    Cell::Num(exp_arr[i]),
                    Cell::Num(obs_dep[i]),
                    Cell::Num(obs_arr[i]),
                ]
            })
            .collect(),
    };
    table.write(dir, "margins", global.format)?;
    let rows: Vec<Vec<f64>> = (0..ids.len()).map(|i| report.rz_hat.entries().row(i).iter().copied().collect()).collect();
    let title = format!("Expected OD matrix ({})", report.method.as_str());
    dir.write("heatmap.svg", heatmap_svg(&title, &ids, &rows).as_bytes())?;
    let bars = bar_chart_svg(
        "Expected passengers entry and exit",
        &ids,
        &[
            ("expected departures", exp_dep.iter().copied().collect()),
            ("expected arrivals", exp_arr.iter().copied().collect()),
        ],
    );
    dir.write("margins.svg", bars.as_bytes())?;
    Ok(())
}
