use std::path::PathBuf;

use crate::soav::DetectionResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("entry {index} is not in the symbol alphabet: {value}")]
    InvalidSymbol { index: usize, value: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value encountered at entry {index}")]
    NonFinite { index: usize },

    #[error("iterates diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("problem dimension {dimension} exceeds the exhaustive-search limit {limit}")]
    DimensionExceeded { dimension: usize, limit: usize },

    /// The penalty schedule was exhausted before the residual reached the
    /// constraint radius. The best iterate found is still available.
    #[error("residual {residual:.6e} did not reach the constraint radius {epsilon:.6e}")]
    NotConverged {
        residual: f64,
        epsilon: f64,
        best: Box<DetectionResult>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
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

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Parse { .. }
                | Error::InvalidParameter(_)
                | Error::InvalidDimension(_)
                | Error::DimensionMismatch { .. }
                | Error::InvalidSymbol { .. }
                | Error::DimensionExceeded { .. }
        )
    }
}
