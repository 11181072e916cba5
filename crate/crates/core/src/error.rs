use std::path::PathBuf;

use thiserror::Error;

/// Error type shared by the whole crate.
#[derive(Debug, Error)]
pub enum IflError {
    /// Input bytes could not be decoded into the expected shape.
    /// `row` and `column` are 1-based and count header lines.
    #[error("malformed input at row {row}, column {column}: {message}")]
    MalformedInput {
        row: usize,
        column: usize,
        message: String,
    },

    /// Structurally valid input that violates a documented precondition.
    #[error("validation failed: {0}")]
    Validation(String),

    /// A parameter outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Run-configuration file problems (I/O or TOML level).
    #[error("config {}: {message}", path.display())]
    Config { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serialization(String),
}

impl IflError {
    pub fn validation(msg: impl Into<String>) -> Self {
        IflError::Validation(msg.into())
    }

    pub fn invalid_parameter(msg: impl Into<String>) -> Self {
        IflError::InvalidParameter(msg.into())
    }
}

impl From<serde_json::Error> for IflError {
    fn from(e: serde_json::Error) -> Self {
        IflError::Serialization(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, IflError>;
