use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("problem size {n} exceeds the dense oracle cap of {cap}")]
    SizeCap { n: usize, cap: usize },

    #[error("matrix is singular or not positive definite")]
    Singular,

    #[error("search direction is not a descent direction (g'p = {slope})")]
    NonDescent { slope: f64 },

    #[error("z-step normalizer vanished at component {index}")]
    ZeroNormalizer { index: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("worker {worker} failed: {message}")]
    WorkerFailed { worker: usize, message: String },

    #[error("bounded delay violated: worker {worker} has staleness {staleness} > {bound}")]
    BoundedDelay {
        worker: usize,
        staleness: usize,
        bound: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
