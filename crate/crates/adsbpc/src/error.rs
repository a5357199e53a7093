use thiserror::Error;

/// Errors raised across the measurement pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A CSV row could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A parsed value violates an invariant (e.g. negative timestamp).
    #[error("validation error at line {line}: {message}")]
    Validation { line: usize, message: String },

    /// An argument is outside the function's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An index is out of range.
    #[error("range error: {0}")]
    Range(String),

    /// Inconsistent run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
