use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation was called with arguments violating its contract.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A mathematical domain condition failed (e.g. non-H-stable blow-up in the
    /// partition limit formula).
    #[error("domain error: {0}")]
    Domain(String),

    /// An MCMC estimator failed its stationarity heuristic.
    #[error("MCMC non-convergence: {0}")]
    NonConvergence(String),

    /// An operation outside the supported desk-scale range was requested.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A numerical instability guard tripped.
    #[error("instability: {0}")]
    Instability(String),

    /// Configuration file problems.
    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
