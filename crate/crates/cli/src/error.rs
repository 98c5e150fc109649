use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("checkpoint {path} belongs to config {found}, current config is {expected}")]
    ConfigMismatch { path: String, found: String, expected: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Core(#[from] resonator_core::Error),

    #[error("invariant suite failed: {0}")]
    SuiteFailed(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::ConfigMismatch { .. } => "config_mismatch",
            CliError::Io(_) => "io",
            CliError::Core(e) => e.code(),
            CliError::SuiteFailed(_) => "suite_failed",
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::SuiteFailed(_) => ExitCode::from(2),
            _ => ExitCode::from(1),
        }
    }
}
