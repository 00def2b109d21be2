use thiserror::Error;

/// Errors raised by the density, estimator and experiment layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("density has zero total mass")]
    AllZero,

    #[error("domain too small: boundary mass {boundary_mass:.3e} exceeds {limit:.1e}")]
    DomainTooSmall { boundary_mass: f64, limit: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("Fisher trace must be positive, got {0}")]
    NonPositiveFisher(f64),

    #[error("estimator budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("cross-check failed: {what} ({a:.6e} vs {b:.6e}, relative gap {rel:.3e} > {tol:.1e})")]
    CrossCheckFailed {
        what: String,
        a: f64,
        b: f64,
        rel: f64,
        tol: f64,
    },

    #[error("filter order {0} rejected (maximum is 4)")]
    FilterOrderRejected(u32),

    #[error("invariant violated: {0}")]
    InvariantViolated(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
