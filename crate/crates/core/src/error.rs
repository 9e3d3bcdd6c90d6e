use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Malformed or inconsistent input data.
    #[error("invalid input: {0}")]
    Input(String),
    /// Exhaustive enumeration refused because the state space is too large.
    #[error("enumeration of {cells} cells exceeds the size guard of {limit}")]
    SizeGuard { cells: u128, limit: u128 },
    /// An internal invariant failed. Never expected; reported rather than masked.
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn input(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}
