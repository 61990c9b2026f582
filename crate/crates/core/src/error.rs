use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} columns, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("all positively weighted labels belong to one class")]
    SingleClass,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("weighted normal equations are singular")]
    RankDeficient,

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("all weights are zero")]
    AllZero,

    #[error("negative input {value} at index {index} cannot be transformed")]
    NegativeInput { index: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown subgroup {label:?}; available: {available:?}")]
    UnknownSubgroup { label: String, available: Vec<String> },

    #[error("data error at row {row}, column {column:?}: {message}")]
    Data {
        row: usize,
        column: String,
        message: String,
    },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
