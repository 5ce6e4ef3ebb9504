use std::path::PathBuf;

use thiserror::Error;

use crate::thread_model::Violation;

/// Errors raised while reading or validating corpora.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("unknown stance {0:?}")]
    UnknownStance(String),
    #[error("unknown veracity label {0:?}")]
    UnknownVeracity(String),
    #[error("thread {thread}: duplicate reply id {id:?}")]
    DuplicateId { thread: String, id: String },
    #[error("thread {thread}: reply {id:?} has dangling parent {parent:?}")]
    DanglingParent {
        thread: String,
        id: String,
        parent: String,
    },
    #[error("thread {thread}: invalid ({} violations, first: {})", violations.len(), violations.first().map(|v| v.to_string()).unwrap_or_default())]
    InvalidThread {
        thread: String,
        violations: Vec<Violation>,
    },
    #[error("duplicate thread id {0:?}")]
    DuplicateThread(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Errors from text encoders.
#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("invalid encoder config: {0}")]
    Config(String),
    #[error("embedding service request timed out")]
    Timeout,
    #[error("embedding service unreachable: {0}")]
    Network(String),
    #[error("embedding service returned status {0}")]
    Status(u16),
    #[error("embedding service returned {got} vectors for {expected} texts")]
    CountMismatch { expected: usize, got: usize },
    #[error("embedding dimension {got} does not match configured {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("malformed embedding payload: {0}")]
    Malformed(String),
}

/// Errors from model construction, training and inference.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("index {index} out of range for thread with {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Data(#[from] DataError),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;
