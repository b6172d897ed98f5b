use thiserror::Error;

/// Errors raised by the cognitive toolkit primitives.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CogError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("zero-norm vector in {0}")]
    ZeroNorm(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),

    #[error("duplicate symbol `{0}`")]
    DuplicateSymbol(String),

    #[error("recall position {position} out of range (buffer holds {len} items)")]
    PositionOutOfRange { position: usize, len: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("settling diverged (|z| exceeded {limit:e}); step size beta = {beta} is too large")]
    Divergence { beta: f64, limit: f64 },

    #[error("competitive gate has no recruited units")]
    NoUnits,

    #[error("gate unit {0} is not recruited")]
    Unrecruited(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("snapshot error: {0}")]
    Snapshot(String),
}

pub type Result<T> = std::result::Result<T, CogError>;
