//! Experiment drivers and exit-code conventions for the `hcs` binary.

pub mod experiments;

use hcs_core::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const INVALID_PARAMETER: i32 = 2;
    pub const SIZE_LIMIT: i32 = 3;
    pub const EXPERIMENT_FAILURE: i32 = 4;
    pub const INVALID_INPUT: i32 = 5;
}

/// An experiment ran but some row broke the invariant it checks.
#[derive(Debug, thiserror::Error)]
#[error("experiment failure: {0}")]
pub struct ExperimentFailure(pub String);

/// Maps an error chain to its exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<ExperimentFailure>().is_some() {
        return exit::EXPERIMENT_FAILURE;
    }
    if let Some(e) = err.downcast_ref::<Error>() {
        return match e {
            Error::InvalidParameter(_) => exit::INVALID_PARAMETER,
            Error::SizeLimit(_) => exit::SIZE_LIMIT,
            Error::InvalidInstance(_) | Error::InvalidLabeling(_) | Error::InvalidInput(_) => exit::INVALID_INPUT,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() || err.downcast_ref::<serde_json::Error>().is_some() {
        return exit::INVALID_INPUT;
    }
    exit::OTHER
}
