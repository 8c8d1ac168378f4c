//! Error types shared across the crate.

/// Errors produced by geometry construction, field validation, and solvers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A descriptor or option set is malformed (bad bounds, missing keys,
    /// parameters outside the supported regime).
    #[error("configuration error: {0}")]
    Config(String),

    /// Inputs are structurally fine but violate a mathematical precondition
    /// (non-positive reference function, set touching the boundary, zero
    /// weight where mass is required).
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller mixed incompatible objects, e.g. fields living on different
    /// geometries.
    #[error("usage error: {0}")]
    Usage(String),

    /// The grid is too coarse for the requested computation.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// A stated hypothesis of the computation is violated by the data
    /// (e.g. a sign condition on the potential).
    #[error("hypothesis violation: {0}")]
    Hypothesis(String),

    /// I/O failure while reading configs or writing reports.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
    pub fn resolution(msg: impl Into<String>) -> Self {
        Error::Resolution(msg.into())
    }
    pub fn hypothesis(msg: impl Into<String>) -> Self {
        Error::Hypothesis(msg.into())
    }
}
