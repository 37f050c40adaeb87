use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SaaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SaaError {
    /// Malformed configuration. `line` is 1-based when the error comes from a file.
    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed {kind} data: {message}")]
    Format { kind: &'static str, message: String },

    #[error("checkpoint version mismatch: expected {expected}, found {found}")]
    Version { expected: u32, found: u32 },

    #[error("non-finite loss at iteration {iteration} (sample ids {sample_ids:?})")]
    NonFinite { iteration: u64, sample_ids: Vec<usize> },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SaaError {
    pub fn config(message: impl Into<String>) -> Self {
        SaaError::Config { line: None, message: message.into() }
    }

    pub fn config_at(line: usize, message: impl Into<String>) -> Self {
        SaaError::Config { line: Some(line), message: message.into() }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        SaaError::InvalidArgument(message.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SaaError::Io { path: path.into(), source }
    }

    pub fn format(kind: &'static str, message: impl Into<String>) -> Self {
        SaaError::Format { kind, message: message.into() }
    }

    /// True for errors caused by user-supplied configuration rather than runtime failures.
    pub fn is_config(&self) -> bool {
        matches!(self, SaaError::Config { .. } | SaaError::InvalidArgument(_))
    }
}
