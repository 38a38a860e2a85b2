use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("a composition needs at least 2 parts, got {0}")]
    DimensionTooSmall(usize),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("part {index} is negative ({value})")]
    NegativePart { index: usize, value: f64 },

    #[error("part {index} is not finite")]
    NonFinitePart { index: usize },

    #[error("part {index} is zero; the operation needs strictly positive parts")]
    ZeroPart { index: usize },

    #[error("parts sum to {sum}, outside the accepted tolerance around 1")]
    SumOutOfTolerance { sum: f64 },

    #[error("cannot close an all-zero vector")]
    AllZero,

    #[error("invalid alpha {0}")]
    InvalidAlpha(f64),

    #[error("zero pattern does not match the composition")]
    PatternMismatch,

    #[error("only {positive} positive part(s); at least 2 are required")]
    DegeneratePattern { positive: usize },

    #[error("duplicate location at index {index}")]
    DuplicateLocation { index: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("point {index} lies outside the transform codomain (excess {excess:e})")]
    OutsideCodomain { index: usize, excess: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}
