use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("multiplicity mismatch: expected {expected}, got {got}")]
    MultiplicityMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("enumeration bound exceeded: {0}")]
    EnumerationBound(String),

    #[error("solver did not converge: {context} (best residual {residual:.3e})")]
    Convergence { context: String, residual: f64 },

    #[error("point outside domain: {0}")]
    Domain(String),

    #[error("geometry construction failed: {0}")]
    Geometry(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
