use alloc::string::String;

/// Errors raised by the estimation, simulation and evaluation routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    /// A measurement coincides with the tracked center, so its bearing is undefined.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("degenerate estimate: {0}")]
    DegenerateEstimate(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalFailure(msg.into())
    }
}
