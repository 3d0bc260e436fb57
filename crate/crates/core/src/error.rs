use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SsaError {
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("encoder range requires lo < hi (got lo={lo}, hi={hi})")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("LFSR seed must be nonzero")]
    ZeroSeed,

    #[error("count {count} exceeds denominator {denom}")]
    CounterOverflow { count: u32, denom: u32 },

    #[error("{what} must be a power-of-two value in [{min}, {max}] (got {value})")]
    NotPowerOfTwo {
        what: &'static str,
        value: usize,
        min: usize,
        max: usize,
    },

    #[error("dimension mismatch in {context}: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        context: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("matrix entry at ({row}, {col}) is not binary")]
    NonBinary { row: usize, col: usize },

    #[error("matrix entry at ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },

    #[error("matrix entry {value} at ({row}, {col}) outside [0, 1]")]
    OutOfUnitRange { row: usize, col: usize, value: f64 },

    #[error("matrix must have at least one row and one column")]
    EmptyMatrix,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot decode an empty output sequence")]
    EmptySequence,

    #[error("SAU ({row}, {col}) counter {value} exceeds D_K={d_k}")]
    SauCounterOverflow {
        row: usize,
        col: usize,
        value: u16,
        d_k: usize,
    },

    #[error("SAU ({row}, {col}) value FIFO {kind}")]
    Fifo {
        row: usize,
        col: usize,
        kind: &'static str,
    },

    #[error("matrix file: {0}")]
    MatrixFile(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SsaError {
    fn from(e: std::io::Error) -> Self {
        SsaError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SsaError>;
