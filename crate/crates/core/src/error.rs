use thiserror::Error;

/// Errors produced by the simulator, models, training loop and CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The circuit state became non-finite.
    #[error("simulation diverged at integration step {step}")]
    SimulationDiverged { step: u64 },

    /// A gradient step produced a non-finite value.
    #[error("non-finite gradient")]
    NonFiniteGradient,

    /// Training produced a non-finite error or parameter at `iteration` (1-based).
    #[error("training diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
