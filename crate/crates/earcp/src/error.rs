//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Vector lengths disagree (prediction dimension, expert count, ...).
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The number of prediction vectors does not match the session's expert count.
    #[error("expert count mismatch: session has {expected} experts, got {got} predictions")]
    ExpertCountMismatch { expected: usize, got: usize },

    /// A configuration field is outside its allowed range.
    #[error("invalid configuration: {field}: {message}")]
    Config { field: &'static str, message: String },

    /// An input violates a documented precondition (off-simplex weights,
    /// non-finite values, empty traces, malformed change points, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// `update` was called for a step that has no pending prediction.
    #[error("no pending feedback for step {step}")]
    MissingFeedback { step: u64 },

    /// The replay buffer is full; feedback must be supplied before more
    /// predictions can be queued.
    #[error("pending feedback overflow: {len} unresolved steps reach the limit of {max}")]
    FeedbackOverflow { len: usize, max: usize },

    /// An update variant was called on a session configured for the other one.
    #[error("mode mismatch: {0}")]
    ModeMismatch(String),

    /// A serialized snapshot declares an unsupported schema version.
    #[error("unsupported snapshot schema version {got} (expected {expected})")]
    SchemaVersion { expected: u32, got: u32 },

    /// A serialized snapshot failed to parse or is internally inconsistent.
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
}

impl Error {
    pub(crate) fn config(field: &'static str, message: impl Into<String>) -> Self {
        Error::Config {
            field,
            message: message.into(),
        }
    }

    pub(crate) fn contract(message: impl Into<String>) -> Self {
        Error::Contract(message.into())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
