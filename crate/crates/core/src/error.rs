use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input lies outside the domain where the formula is physical.
    #[error("domain violation: {0}")]
    Domain(String),

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),

    #[error("grid under-resolved: {0}")]
    UnderResolved(String),

    #[error("wavefunction leaks through the grid boundary: {0}")]
    Leakage(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
