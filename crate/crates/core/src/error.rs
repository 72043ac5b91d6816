use thiserror::Error;

/// Errors raised by the simulation and estimation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical configuration (grid, step size, window) violates a bound.
    #[error("configuration error: {0}")]
    Config(String),
    /// Input data does not satisfy the structural requirements of an operation.
    #[error("invalid data: {0}")]
    Data(String),
    /// Data carries no usable signal (flat trace, baseline only).
    #[error("degenerate data: {0}")]
    Degenerate(String),
    /// A numerical procedure failed (non-finite values, singular system).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn data(msg: impl Into<String>) -> Error {
    Error::Data(msg.into())
}
