use std::path::PathBuf;

use odest::OdError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("output directory {} already exists; pass --force to replace it", .0.display())]
    OutputExists(PathBuf),
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: OdError },
    #[error(transparent)]
    Od(#[from] OdError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// 0 success, 1 I/O or schema, 2 configuration, 3 numeric failure.
pub fn exit_code(err: &CliError) -> u8 {
    match err {
        CliError::OutputExists(_) | CliError::Io(_) => 1,
        CliError::Usage(_) => 2,
        CliError::Input { source, .. } | CliError::Od(source) => od_exit_code(source),
    }
}

pub fn od_exit_code(err: &OdError) -> u8 {
    match err {
        OdError::Io(_)
        | OdError::Csv(_)
        | OdError::Schema { .. }
        | OdError::MissingData(_)
        | OdError::EmptyNetwork
        | OdError::Dimension(_)
        | OdError::DataInconsistency(_)
        | OdError::InvalidMatrix(_)
        | OdError::NotSymmetric { .. } => 1,
        OdError::InvalidParameter { .. } => 2,
        OdError::Numeric(_)
        | OdError::EstimationImpossible(_)
        | OdError::InfeasibleInit(_)
        | OdError::RankDeficient { .. }
        | OdError::NegativeMean { .. }
        | OdError::Degenerate(_) => 3,
    }
}

pub trait InputContext<T> {
    fn input(self, path: &std::path::Path) -> Result<T, CliError>;
}

impl<T> InputContext<T> for odest::Result<T> {
    fn input(self, path: &std::path::Path) -> Result<T, CliError> {
        self.map_err(|source| CliError::Input {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes() {
        assert_eq!(od_exit_code(&OdError::EstimationImpossible("x".into())), 3);
        assert_eq!(
            od_exit_code(&OdError::InvalidParameter {
                name: "sim.noise_level".into(),
                reason: "r".into()
            }),
            2
        );
        assert_eq!(od_exit_code(&OdError::Io(std::io::Error::other("x"))), 1);
        assert_eq!(exit_code(&CliError::OutputExists("d".into())), 1);
        let wrapped = CliError::Input {
            path: "s.csv".into(),
            source: OdError::EmptyNetwork,
        };
        assert_eq!(exit_code(&wrapped), 1);
        assert!(wrapped.to_string().starts_with("s.csv: "));
    }
}
