use thiserror::Error;

/// Errors raised by the sampler, the simulator and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An internal invariant of the protocol was broken. Seeing this is a bug.
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// The event queue drained while some updates were still unresolved.
    #[error("simulation deadlocked: {0}")]
    Deadlock(String),

    #[error("config: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
