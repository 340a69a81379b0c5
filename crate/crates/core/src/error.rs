use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    #[error("field mismatch: Q(sqrt {left}) vs Q(sqrt {right})")]
    FieldMismatch { left: String, right: String },
    #[error("invalid discriminant {0}: must be >= 2 and not a perfect square")]
    InvalidDiscriminant(String),
    #[error("invalid period: {0}")]
    InvalidPeriod(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("orbit point r = {0} is an exact integer; the input is not irrational")]
    IntegralOrbitPoint(u64),
    #[error("factor s_n({0}) vanishes exactly")]
    ZeroFactor(u64),
    #[error("index k = {k} carries digit {a_k}, but the maximal digit is {max}")]
    NotMaximalDigit { k: usize, a_k: u32, max: u32 },
    #[error("digit a_k = {a_k} is below the required minimum {min}")]
    DigitTooSmall { a_k: u32, min: u32 },
    #[error("truncation cap reached at T = {t} with tail bound {tail:e} above tolerance {tol:e}")]
    TruncationCap { t: u64, tail: f64, tol: f64 },
    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
