use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is singular (pivot {pivot:e} at column {column})")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown variable x{index} at line {line}, column {column} (dimension is {dim})")]
    UnknownVariable {
        index: usize,
        dim: usize,
        line: usize,
        column: usize,
    },

    #[error("expected {expected} component expressions, found {found}")]
    Arity { expected: usize, found: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("unknown built-in system `{0}` (available: example_2d, example_10d)")]
    UnknownSystem(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
