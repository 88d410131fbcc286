use thiserror::Error;

/// Errors raised by mesh construction, discretization and solving.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwgError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported mesh family/domain combination: {family} on {domain}")]
    UnsupportedMesh { family: String, domain: String },

    #[error("degenerate cell {cell}: {reason}")]
    DegenerateCell { cell: usize, reason: String },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("unsupported quadrature: {0}")]
    Quadrature(String),

    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("singular matrix (pivot {pivot} at row {row})")]
    SingularMatrix { row: usize, pivot: f64 },

    #[error("{method} did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged {
        method: String,
        iterations: usize,
        residual: f64,
    },

    #[error("{method} breakdown at iteration {iteration}")]
    Breakdown { method: String, iteration: usize },

    #[error("norm mode `{0}` is not defined for this mesh")]
    NormModeMismatch(String),

    #[error("missing reference entry: {0}")]
    MissingReference(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SwgError {
    fn from(e: std::io::Error) -> Self {
        SwgError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SwgError>;
