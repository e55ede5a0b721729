use crate::dynamics::InitViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid initial condition: {0}")]
    InvalidInit(#[from] InitViolation),

    #[error("no fixed point reached within {max_steps} steps")]
    NonConvergence { max_steps: u64 },

    #[error("run {run_index} failed: {source}")]
    Worker {
        run_index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed trajectory file: {0}")]
    Format(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
