use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Format(#[from] FormatError),
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("relocalization failed: {0}")]
    Reloc(polemap_core::relocalization::RelocFailure),
    #[error("{0}")]
    Other(String),
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().to_path_buf(), source }
    }

    /// Process exit status for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Io { .. } => 3,
            Error::Format(_) => 4,
            Error::Config(_) => 5,
            Error::Reloc(_) => 6,
            Error::Other(_) => 7,
        }
    }
}

/// A decoding failure, located by byte offset or 1-based line.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("{what}: {len} bytes is not a multiple of {record}")]
    Size { what: &'static str, len: usize, record: usize },
    #[error("{points} points but {labels} labels")]
    CountMismatch { points: usize, labels: usize },
    #[error("byte {offset}: {message}")]
    Byte { offset: usize, message: String },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("unsupported map version {found}, expected {expected}")]
    Version { found: String, expected: u32 },
    #[error("{0}")]
    Other(String),
}

impl FormatError {
    pub fn line(line: usize, message: impl Into<String>) -> Self {
        FormatError::Line { line, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected key = value")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("invalid {group} parameters: {message}")]
    Invalid { group: &'static str, message: String },
}
