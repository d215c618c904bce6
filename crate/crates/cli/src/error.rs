use std::path::{Path, PathBuf};

use thiserror::Error;

/// Errors of the command layer, mapped onto process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input files and library argument errors.
    #[error(transparent)]
    Input(wadmm_core::Error),

    #[error("solver failed: {0}")]
    Solver(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 for solver failures, 2 for configuration and I/O problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(_) => 1,
            _ => 2,
        }
    }
}

impl From<wadmm_core::Error> for CliError {
    fn from(e: wadmm_core::Error) -> Self {
        use wadmm_core::Error as E;
        match e {
            E::Singular
            | E::NonDescent { .. }
            | E::ZeroNormalizer { .. }
            | E::WorkerFailed { .. }
            | E::BoundedDelay { .. } => CliError::Solver(e.to_string()),
            other => CliError::Input(other),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
