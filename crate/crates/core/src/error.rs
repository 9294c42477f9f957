use thiserror::Error;

/// Errors raised by lattice construction, problem setup, the solver and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected} entries, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),

    #[error("endpoint masses differ by {0:e}")]
    MassMismatch(f64),

    #[error("density must be strictly positive, found {value} at index {index}")]
    NonPositiveDensity { index: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("objective is infinite at the starting point; floor the endpoint histograms")]
    InfiniteObjective,

    #[error("linear solver failed: {reason} (relative residual {residual:e})")]
    LinearSolve { reason: String, residual: f64 },

    #[error("Newton direction is not a descent direction (d·g = {0:e})")]
    NonDescent(f64),

    #[error("malformed input {path}: {reason}")]
    Parse { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
