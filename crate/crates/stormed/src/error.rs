use thiserror::Error;

#[derive(Debug, Error)]
pub enum StormedError {
    #[error("invalid certificate: {0}")]
    BadCertificate(String),
    #[error("guard of edge `{0}` is unbounded; intersect it with a bounding invariant")]
    UnboundedGuard(String),
    #[error("degenerate band: b_plus {0} <= b_minus {1}")]
    DegenerateBand(f64, f64),
    #[error("composition input: {0}")]
    BadComposition(String),
    #[error("sample space has no region for mode `{0}`")]
    NoRegion(String),
    #[error(transparent)]
    Geometry(#[from] setgeom::SetgeomError),
    #[error(transparent)]
    Hybrid(#[from] hybrid_core::HybridError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, StormedError>;
