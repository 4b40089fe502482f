use thiserror::Error;

/// Errors produced while building problems or running the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid data matrix: {0}")]
    InvalidData(String),

    #[error("invalid weight graph: {0}")]
    InvalidGraph(String),

    #[error("neighbor count k={k} out of range for n={n} points (need 1 <= k <= n-1)")]
    KOutOfRange { k: usize, n: usize },

    #[error("operation requires at least one edge")]
    EmptyEdgeSet,

    #[error("invalid penalty norm: {0}")]
    InvalidNorm(String),

    #[error("parameter {name} must be nonnegative, got {value}")]
    NegativeParameter { name: &'static str, value: f64 },

    #[error("simplex projection radius must be positive and finite, got {0}")]
    InvalidRadius(f64),

    #[error("step size {step} violates the admissible bound {bound}")]
    StepTooLarge { step: f64, bound: f64 },

    #[error("cached factorization does not match the current graph and step size")]
    StaleFactorization,

    #[error("sparse centroid update requires a cached factorization; build one with CachedFactor::new")]
    MissingFactorization,

    #[error("centroid update mode does not match the graph: {0}")]
    ModeMismatch(String),

    #[error("factorization failed: {0}")]
    FactorizationFailed(String),

    #[error("invalid gamma grid: {0}")]
    InvalidGrid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
