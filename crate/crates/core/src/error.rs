//! Crate-wide error type.
//!
//! Every fallible public operation returns [`Error`]. The CLI maps variants to
//! process exit codes: validation failures to 2, width-cap overruns to 3,
//! exhausted randomized-construction retries to 4, everything else to 1.

/// Errors produced by construction, training, tracing, and experiment code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed or out-of-range input (bad arguments, non-finite values,
    /// unknown names, schema violations).
    #[error("validation: {0}")]
    Validation(String),

    /// A construction needs more basis functions than the configured cap.
    #[error("width cap exceeded: construction needs {required} locations, cap is {cap}")]
    WidthCap { required: usize, cap: usize },

    /// A randomized construction attempt failed for this seed; retrying with a
    /// different seed may succeed.
    #[error("randomized construction failed for this seed: {reason}")]
    Retry { reason: String },

    /// Greedy matching could not claim a candidate for every target.
    #[error("matching failed: {} of {} targets unmatched (first unmatched index {})",
            unmatched.len(), total, unmatched.first().copied().unwrap_or(0))]
    MatchNotFound { unmatched: Vec<usize>, total: usize },

    /// Internal consistency check failed while assembling or verifying a
    /// network; indicates a sizing bug rather than bad user input.
    #[error("construction: {0}")]
    Construction(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand for a [`Error::Validation`] with a formatted message.
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Shorthand for a [`Error::Construction`] with a formatted message.
    pub fn construction(msg: impl Into<String>) -> Self {
        Error::Construction(msg.into())
    }
}
