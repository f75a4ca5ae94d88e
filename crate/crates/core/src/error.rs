use thiserror::Error;

pub type Result<T> = std::result::Result<T, OdError>;

/// Errors raised by the estimation toolkit.
#[derive(Debug, Error)]
pub enum OdError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not symmetric (max |a_ij - a_ji| = {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },
    #[error("invalid OD matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("data inconsistency: {0}")]
    DataInconsistency(String),
    #[error("estimation impossible: {0}")]
    EstimationImpossible(String),
    #[error("infeasible initial point: {0}")]
    InfeasibleInit(String),
    #[error("design matrix is rank deficient (condition number {condition:e})")]
    RankDeficient { condition: f64 },
    #[error("negative mean flows on days {days:?}")]
    NegativeMean { days: Vec<usize> },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("schema error in {path}: {reason}")]
    Schema { path: String, reason: String },
    #[error("network has no stations")]
    EmptyNetwork,
    #[error("missing station-days: {0}")]
    MissingData(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl OdError {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        OdError::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn schema(path: impl Into<String>, reason: impl Into<String>) -> Self {
        OdError::Schema {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
