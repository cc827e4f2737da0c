use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const DIVERGENCE: i32 = 4;
    pub const WARNING: i32 = 5;
    pub const CONFLICT: i32 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    /// The command finished and wrote its outputs, but flagged a problem.
    #[error("warning: {0}")]
    Warning(String),
    #[error("refusing to overwrite {0} with different contents (use --force)")]
    Conflict(PathBuf),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(xbm_core::Error),
}

impl From<xbm_core::Error> for CliError {
    fn from(e: xbm_core::Error) -> Self {
        use xbm_core::Error as E;
        match e {
            E::Divergence(m) => CliError::Divergence(m),
            E::Format { .. } | E::Parse { .. } | E::Io(_) => CliError::Data(e.to_string()),
            E::InvalidParameter(_) | E::UnsupportedSize(_) | E::KindMismatch(_) | E::TooLarge(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Data(_) => exit::DATA,
            CliError::Divergence(_) => exit::DIVERGENCE,
            CliError::Warning(_) => exit::WARNING,
            CliError::Conflict(_) => exit::CONFLICT,
            CliError::Io { .. } | CliError::Core(_) => exit::IO,
        }
    }
}
