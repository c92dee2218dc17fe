use thiserror::Error;

#[derive(Debug, Error)]
pub enum HybridError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown mode `{0}`")]
    UnknownMode(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("geometry error: {0}")]
    Geometry(#[from] setgeom::SetgeomError),
    #[error("zeno behavior: {0} discrete jumps without time progress at t = {1}")]
    Zeno(usize, f64),
    #[error("jump budget of {0} exhausted at t = {1}")]
    JumpBudget(usize, f64),
    #[error("operation unsupported for this flow: {0}")]
    UnsupportedFlow(String),
    #[error("product too large: {0} modes exceed cap {1}")]
    TooManyModes(usize, usize),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, HybridError>;
