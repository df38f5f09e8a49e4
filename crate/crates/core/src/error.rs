//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by any module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix had a different size than the operation expected.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// Invalid configuration value or malformed config file.
    #[error("config error: {0}")]
    Config(String),

    /// A gradient or loss stopped being finite; the update was rejected.
    #[error("non-finite value in {0}; update rejected")]
    NonFinite(&'static str),

    /// Retained activations do not match the parameters they were built from.
    #[error("stale or missing retained activations for backward pass")]
    StaleTape,

    /// File did not start with the expected magic bytes.
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: [u8; 4] },

    /// File carries an unsupported format version.
    #[error("unsupported format version {got} (supported: {supported})")]
    VersionMismatch { got: u32, supported: u32 },

    /// File ended before the declared contents were read.
    #[error("truncated input: needed {needed} more bytes")]
    Truncated { needed: usize },

    /// Operation requires a nonempty buffer or set.
    #[error("empty {0}")]
    Empty(&'static str),

    /// Attempted to update a frozen classifier.
    #[error("classifier is frozen; updates rejected")]
    Frozen,

    /// Environment phase violation (e.g. forward step while not holding).
    #[error("{0}")]
    Phase(&'static str),

    /// Too few of the requested episodes succeeded.
    #[error("expert success rate {rate:.2} below 0.5 over {episodes} episodes")]
    ExpertFailure { rate: f64, episodes: usize },

    /// Reset never succeeded within the hard attempt cap.
    #[error("reset failed after {0} attempts")]
    ResetFailure(usize),

    /// Requested more items than available.
    #[error("requested {requested} items from {available}")]
    OutOfRange { requested: usize, available: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
