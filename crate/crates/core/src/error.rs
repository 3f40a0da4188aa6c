use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller broke an operation's precondition.
    #[error("usage error: {0}")]
    Usage(String),

    /// Graph structure is unusable (disconnected, bad indices, self-loops).
    #[error("topology error: {0}")]
    Topology(String),

    /// Consensus matrix fails the spectral gap requirement.
    #[error("spectral error: {0}")]
    Spectral(String),

    /// Bound evaluated outside the region where it is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Model parameters are degenerate or invalid.
    #[error("invalid model: {0}")]
    Model(String),

    /// Threshold bisection failed to reach the target ARL.
    #[error("calibration did not converge: {0}")]
    Calibration(String),

    /// Malformed text input.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}
