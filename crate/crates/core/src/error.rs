//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by model evaluation, metrics, data handling, and the
/// optimization driver.
#[derive(Debug, Error)]
pub enum Error {
    /// A client shard contains no samples.
    #[error("empty client: {client_id}")]
    EmptyClient { client_id: String },

    /// A group-conditional metric was asked for on a shard where one group
    /// (or one group restricted to positive labels) has no samples.
    #[error("degenerate group on client {client_id}: {detail}")]
    DegenerateGroup { client_id: String, detail: String },

    /// Vector/matrix dimensions do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A finite value was required but a NaN/inf showed up.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// Problem construction was handed inconsistent pieces (e.g. budget count
    /// != client count).
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    /// Tabular input could not be read or does not match the declared schema.
    #[error("data error: {0}")]
    Data(String),

    /// Underlying I/O failure while reading a table.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
