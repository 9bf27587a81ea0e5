use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Unsupported(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<conecoord_core::Error> for CliError {
    fn from(e: conecoord_core::Error) -> Self {
        use conecoord_core::Error as E;
        match e {
            E::Config(_) | E::InvalidArgument(_) | E::SlaterViolation(_) => {
                CliError::Config(e.to_string())
            }
            E::UnsupportedSubproblem { .. } => CliError::Unsupported(e.to_string()),
            E::DimensionMismatch { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
