use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Exit status contract of the binary.
pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("{0}")]
    Usage(String),
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Core(#[from] tacsyn_core::Error),
}

impl LabError {
    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        Self::Io { context: context.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        use tacsyn_core::Error as E;
        match self {
            LabError::Usage(_) | LabError::Config { .. } | LabError::Data { .. } => EXIT_USAGE,
            LabError::Core(E::Config(_) | E::Domain(_) | E::Calibration(_)) => EXIT_USAGE,
            LabError::Io { .. } | LabError::Core(_) => EXIT_RUNTIME,
        }
    }
}

pub type LabResult<T> = Result<T, LabError>;
