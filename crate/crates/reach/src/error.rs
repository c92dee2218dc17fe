use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReachError {
    #[error("invalid reach config: {0}")]
    BadConfig(String),
    #[error("initial set is empty")]
    EmptyInitial,
    #[error("flow not supported by this operator: {0}")]
    UnsupportedFlow(String),
    #[error("initial set is unbounded in a needed direction")]
    UnboundedInitial,
    #[error(transparent)]
    Geometry(#[from] setgeom::SetgeomError),
    #[error(transparent)]
    Hybrid(#[from] hybrid_core::HybridError),
}

pub type Result<T> = std::result::Result<T, ReachError>;
