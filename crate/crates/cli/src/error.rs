use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, bad configuration or parameters that define no model.
    #[error("{0}")]
    Usage(String),
    #[error("cannot read config {path}: {source}")]
    ConfigRead { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    ConfigParse { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Numerical(#[from] ermakov_qubit::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    /// 2 for usage and configuration errors, 1 for everything that fails at run time.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::ConfigRead { .. } | CliError::ConfigParse { .. } => 2,
            CliError::Numerical(_) | CliError::Io { .. } => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
