use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid labeling: {0}")]
    InvalidLabeling(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! invalid_param {
    ($($arg:tt)*) => { $crate::error::Error::InvalidParameter(format!($($arg)*)) };
}
pub(crate) use invalid_param;
