use std::path::PathBuf;

use rbphoton_core::Error as ModelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("cannot read `{path}`: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write `{path}`: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error("serializing {what}: {source}")]
    Serialize { what: String, source: serde_json::Error },
}

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Model(ModelError::config(field, reason))
    }

    /// 2 for bad input, 4 for coverage, 3 for every other failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Model(ModelError::Config { .. } | ModelError::Domain { .. }) => 2,
            Self::Read { .. } => 2,
            Self::Model(ModelError::Coverage(_) | ModelError::Resolution { .. }) => 4,
            _ => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
