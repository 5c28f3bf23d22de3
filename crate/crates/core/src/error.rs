use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("eigensolver did not converge: {0}")]
    Spectral(String),

    #[error("partition infeasible: {0}")]
    Partition(String),

    #[error("invalid problem: {0}")]
    Problem(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid hyperparameter: {0}")]
    Hyperparameter(String),

    #[error("non-finite value in {what} at agent {agent}, round {round}")]
    NonFinite {
        what: &'static str,
        agent: usize,
        round: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
