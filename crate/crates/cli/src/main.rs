//! `odest`: simulate, estimate and evaluate origin-destination matrices.

mod commands;
mod error;
mod manifest;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::{exit_code, CliError};

#[derive(Parser, Debug)]
#[command(name = "odest", version, about = "Origin-destination matrix estimation from station margins")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Master seed; overrides the configuration file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run directory to create.
    #[arg(long, global = true, default_value = "odest-run")]
    pub out: PathBuf,
    /// Worker threads for replication.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Replace an existing run directory.
    #[arg(long, global = true)]
    pub force: bool,
    /// Encoding of tabular results.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyArg {
    Poisson,
    Negbin,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricArg {
    Haversine,
    Euclidean,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic survey, daily matrices and barrier counts.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Estimate the OD matrix from a survey matrix and barrier counts.
    Estimate {
        #[arg(long)]
        survey: PathBuf,
        #[arg(long)]
        counts: PathBuf,
        #[arg(long)]
        method: String,
        /// Likelihood of the constrained ML estimator.
        #[arg(long, value_enum, default_value_t = FamilyArg::Poisson)]
        family: FamilyArg,
        /// Matrix to score the estimate against.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Daily covariates for the regression estimator.
        #[arg(long)]
        covariates: Option<PathBuf>,
    },
    /// Survey-bias robustness sweep.
    Robustness {
        #[arg(long)]
        config: PathBuf,
        /// 2000 replications per cell.
        #[arg(long)]
        full: bool,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Cramér–von Mises normality of the eigenvalue estimates.
    Normality {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Estimate from station, journey-survey and barrier-count files.
    Apply {
        #[arg(long)]
        stations: PathBuf,
        #[arg(long)]
        journeys: PathBuf,
        #[arg(long)]
        barriers: PathBuf,
        #[arg(long)]
        method: String,
        /// Known daily OD components subtracted from the margins.
        #[arg(long)]
        known: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = MetricArg::Haversine)]
        metric: MetricArg,
        #[arg(long, value_enum, default_value_t = FamilyArg::Poisson)]
        family: FamilyArg,
        /// Ticket classes kept for the survey; all when omitted.
        #[arg(long)]
        survey_class: Vec<String>,
        #[arg(long)]
        covariates: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
    }
    commands::dispatch(&cli.global, cli.command)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
