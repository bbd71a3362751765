use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Solver(#[from] bloch_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Io { .. } | CliError::Csv(_) | CliError::Json(_) => exit::IO,
            CliError::Solver(e) => exit::for_solver(e),
        }
    }
}

pub mod exit {
    use bloch_core::Error;

    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const IO: i32 = 2;
    pub const BLOWUP: i32 = 3;
    pub const BOUND_VIOLATED: i32 = 4;
    pub const SOLVER: i32 = 5;

    pub fn for_solver(e: &Error) -> i32 {
        match e {
            Error::BlowUp { .. } => BLOWUP,
            Error::BoundViolated { .. } => BOUND_VIOLATED,
            _ => SOLVER,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
