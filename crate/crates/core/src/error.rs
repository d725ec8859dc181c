//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside its documented domain (bad mode index, τ ∉ [0,1], ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A state that violates the uncertainty principle was requested or produced.
    #[error("unphysical state: {0}")]
    Unphysical(String),

    /// An estimator was asked for a quantity its input cannot determine
    /// (e.g. an SNR with no signal-off frames to set the noise floor).
    #[error("estimation not possible: {0}")]
    Estimation(String),

    /// Scenario configuration failed to parse or validate. Maps to exit code 2.
    #[error("config error: {0}")]
    Config(String),

    /// Physically unattainable request (e.g. a tap SNR target above the
    /// whole-beam limit). Maps to exit code 3.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
