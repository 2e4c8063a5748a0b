use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpqError {
    #[error("state vector must have at least one amplitude")]
    EmptyState,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("state is not normalized (norm² = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },
    #[error("cannot normalize the zero vector")]
    ZeroNorm,
    #[error("measurement basis is not orthonormal (vectors {first} and {second})")]
    NotOrthonormal { first: usize, second: usize },
    #[error("database must hold at least 2 items, got {0}")]
    TooFewItems(usize),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("answer register is not |0⟩ after uncomputation (weight {0} on |1⟩)")]
    AnswerRegisterNotClear(f64),
    #[error("invalid fake state: {0}")]
    InvalidFake(String),
    #[error("rhetoric count t = {t} out of range [1, {max}]")]
    RhetoricCountOutOfRange { t: usize, max: usize },
    #[error("brute-force interrogation is capped at N = {cap}, got N = {n}")]
    BruteForceCap { n: usize, cap: usize },
    #[error("unsupported for analytic evaluation: {0}")]
    Unsupported(String),
    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, QpqError>;
