//! Command-line error type and its mapping onto process exit codes.

use std::path::{Path, PathBuf};

use cgp_core::{AnalysisError, ConfigError, DatasetIoError, EvolutionError, InvariantError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {}: {message}", path.display())]
    Malformed { path: PathBuf, message: String },
    #[error("invariant violation: {0}")]
    Invariant(#[from] InvariantError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io { .. } | CliError::Malformed { .. } => 2,
            CliError::Invariant(_) => 3,
        }
    }

    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn malformed(path: &Path, message: impl ToString) -> CliError {
        CliError::Malformed {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<EvolutionError> for CliError {
    fn from(e: EvolutionError) -> Self {
        match e {
            EvolutionError::Config(c) => c.into(),
            EvolutionError::Invariant(i) => i.into(),
        }
    }
}

pub fn dataset_error(path: &Path, e: DatasetIoError) -> CliError {
    match e {
        DatasetIoError::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => CliError::malformed(path, other),
    }
}

pub fn csv_error(path: &Path, e: csv::Error) -> CliError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => CliError::Io {
                path: path.to_path_buf(),
                source,
            },
            other => CliError::malformed(path, format!("{other:?}")),
        }
    } else {
        CliError::malformed(path, e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 1);
        let io = CliError::io(Path::new("f"))(std::io::Error::other("boom"));
        assert_eq!(io.exit_code(), 2);
        assert_eq!(CliError::malformed(Path::new("f"), "bad").exit_code(), 2);
        let inv: CliError = EvolutionError::Invariant(InvariantError::PhenotypeChanged {
            before: 1.0,
            after: 0.5,
        })
        .into();
        assert_eq!(inv.exit_code(), 3);
        let cfg: CliError = EvolutionError::Config(ConfigError::UnknownBenchmark("x".into())).into();
        assert_eq!(cfg.exit_code(), 1);
    }
}
