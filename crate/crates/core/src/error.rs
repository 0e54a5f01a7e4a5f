//! Error type shared by every stage of the pipeline.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a closed-form expression
    /// (non-positive density, a Burgers value outside `[w-, w+]`, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A run or experiment was configured inconsistently.
    #[error("configuration error: {0}")]
    Config(String),

    /// An iterative method failed to converge.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The flow solver hit a non-physical state.
    #[error("run failure at step {step} (t = {time:.6e}): {reason}")]
    RunFailure {
        step: usize,
        time: f64,
        reason: String,
    },

    /// An API was called with arguments that do not fit together.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end: 2 for bad
    /// configuration or usage, 1 for everything that failed while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) => 2,
            _ => 1,
        }
    }
}
