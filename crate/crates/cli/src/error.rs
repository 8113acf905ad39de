use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] streamctl_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for usage and configuration problems, 2 for bad data or I/O,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use streamctl_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 1,
            CliError::Io { .. } | CliError::Data(_) => 2,
            CliError::Core(E::Config { .. }) => 1,
            CliError::Core(E::Numerical(_)) => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
