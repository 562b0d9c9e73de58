use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Simulation(#[from] atomflux_core::Error),

    #[error("invariant violated: {quantity} = {value:e}, tolerance {tolerance:e}")]
    Invariant { quantity: String, value: f64, tolerance: f64 },
}

impl CliError {
    /// 2 for failed physical checks, 1 for everything the user can fix.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invariant { .. } | CliError::Simulation(_) => 2,
            CliError::Config { .. } | CliError::Usage(_) | CliError::Io { .. } => 1,
        }
    }
}
