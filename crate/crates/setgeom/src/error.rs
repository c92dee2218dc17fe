use thiserror::Error;

#[derive(Debug, Error)]
pub enum SetgeomError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operation requires a nonempty polytope")]
    EmptyPolytope,
    #[error("operation requires a bounded set (unbounded in direction {dir:?})")]
    Unbounded { dir: Vec<f64> },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, SetgeomError>;
