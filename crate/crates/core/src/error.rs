//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A coordinate, code or index fell outside its valid range.
    #[error("{what} out of range: {value} (max {max})")]
    OutOfRange {
        what: &'static str,
        value: u64,
        max: u64,
    },

    /// Malformed segment-index bytes; `offset` points at the failing field.
    #[error("segment index format error at byte {offset}: {reason}")]
    IndexFormat { offset: usize, reason: String },

    /// A structural invariant of a parsed or constructed value does not hold.
    #[error("validation error: {0}")]
    Validation(String),

    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A segment index covering part of the window has not been fetched.
    #[error("missing segment index for object {object} segment {segment}")]
    MissingIndex { object: usize, segment: u32 },

    /// A problem instance exceeds the size limit of an exhaustive solver.
    #[error("instance too large: {0}")]
    TooLarge(String),

    /// Bad scenario, manifest or command-line configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
