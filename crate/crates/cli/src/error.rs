use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] freqbias::Error),

    /// Unusable flags, config files or input files.
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Input {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for bad configuration or a violated precondition, 3 for numerical
    /// divergence, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_divergence() => 3,
            CliError::Core(_) | CliError::Config(_) | CliError::Input { .. } => 2,
            CliError::Output { .. } | CliError::Csv(_) | CliError::Json(_) => 1,
        }
    }
}
