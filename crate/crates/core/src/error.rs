use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A configuration value violates its documented invariant.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// An API was called out of order (e.g. stepping a finished episode).
    #[error("usage error: {0}")]
    Usage(String),
    /// The integrator or a network produced a non-finite value.
    #[error("numerical fault: {0}")]
    NonFinite(String),
    /// Ziegler-Nichols sweep found no sustained oscillation.
    #[error("tuning failed: {0}")]
    Tuning(String),
    /// Input data violates a structural invariant.
    #[error("invalid data: {0}")]
    Data(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
