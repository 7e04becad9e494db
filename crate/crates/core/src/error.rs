use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("fibering bracket failure: {0}")]
    BracketFailure(String),

    #[error("bracket not found: {0}")]
    NoBracket(String),

    #[error("matrix is not positive definite (pivot {0})")]
    NotPositiveDefinite(usize),

    #[error("nodal collapse: {0}")]
    NodalCollapse(String),

    #[error("nodal correction sweep did not converge after {0} alternations")]
    NodalSweep(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
