use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("unbalanced panel: no row for unit {unit} at time {time}")]
    UnbalancedPanel { unit: i64, time: i64 },
    #[error("common regressor {column} differs across units (unit {unit}, time {time})")]
    CommonRegressorMismatch { column: String, unit: i64, time: i64 },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] panelgls_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Parse { .. } => 4,
            CliError::UnbalancedPanel { .. } => 5,
            CliError::CommonRegressorMismatch { .. } => 6,
            CliError::Model(_) => 7,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
