use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Iterative solver ran out of iterations; carries the best iterate seen.
    #[error("convergence failure after {iterations} iterations (residual {residual:.3e})")]
    ConvergenceFailure {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("cut region has empty interior")]
    RegionEmpty,

    #[error("instance too large for exact mode: {0}")]
    SizeLimit(String),

    #[error("volume estimation failed: no samples accepted")]
    EstimationFailure,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
