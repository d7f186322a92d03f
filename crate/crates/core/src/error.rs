use thiserror::Error;

/// Errors produced by the filtering library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value is unusable (bad noise level, threshold, ...).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A matrix that must be positive definite could not be factored.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// Every particle received zero likelihood.
    #[error("filter degeneracy at step {step}: all log-weights are -inf")]
    Degeneracy { step: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
