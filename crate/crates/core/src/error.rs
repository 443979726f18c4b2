use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("parameter {mu} outside the domain [{lo}, {hi}]")]
    ParameterOutOfDomain { mu: f64, lo: f64, hi: f64 },

    #[error("matrix is singular or not positive definite (pivot {pivot} at row {row})")]
    SingularMatrix { row: usize, pivot: f64 },

    #[error("Newton iteration did not converge at step {step} after {iterations} iterations (residual {residual:.3e})")]
    NewtonNonConvergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("truth solve failed for mu = {mu}: {source}")]
    TruthSolve {
        mu: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("all snapshots vanish; no dominant mode to extract")]
    DegenerateMode,

    #[error("no analytic monotonicity constant is available for this nonlinearity; use the empirical mode")]
    MissingMonotonicityConstant,

    #[error("unsupported model file version {found} (expected {expected})")]
    UnsupportedVersion { expected: u32, found: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
