use std::path::PathBuf;

/// Errors raised by the simulators and the harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid rank {rank} for dimension {dim}")]
    InvalidRank { dim: usize, rank: usize },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),
    #[error("zero-probability branch (p = {0:e})")]
    ZeroProbabilityBranch(f64),
    #[error("degenerate spectrum: minimum gap {gap:e} below {threshold:e}")]
    DegenerateSpectrum { gap: f64, threshold: f64 },
    #[error("diffusion matrix not positive semidefinite (eigenvalue {eigenvalue:e}) at spectrum {spectrum:?}")]
    Covariance { eigenvalue: f64, spectrum: Vec<f64> },
    #[error("too many excluded samples: {excluded} of {samples}")]
    TooManyExclusions { excluded: usize, samples: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Fock oracle limited to n <= 5 modes, got {0}")]
    OracleSize(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
