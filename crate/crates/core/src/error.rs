use thiserror::Error;

/// Errors raised by the model, sampling and inference routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("capacity exceeded: n = {n} is above the enumeration cap of {cap}")]
    Capacity { n: usize, cap: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("sampler tuning failed: {0}")]
    Tuning(String),

    #[error("diagnostics gate failed: {0}")]
    Diagnostics(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
