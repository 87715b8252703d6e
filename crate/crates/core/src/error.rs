use thiserror::Error;

/// Errors raised across the reconstruction library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty coordinate list")]
    EmptyCoords,
    #[error("image must be square, got {width}x{height}")]
    NotSquare { width: usize, height: usize },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("image side {0} exceeds the brute-force oracle limit of {max}", max = crate::gridmath::ORACLE_MAX_SIDE)]
    OracleTooLarge(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("sampler diverged at iteration {iteration}: fidelity {fidelity:e} exceeds 1e6 x initial {initial:e}")]
    Diverged {
        iteration: usize,
        fidelity: f64,
        initial: f64,
        trace: Box<crate::sampler::JointTrace>,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("integrity check failed: {0}")]
    Integrity(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
