use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config field `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Model(#[from] hk_noise::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn schema(path: &str, message: impl Into<String>) -> Self {
        CliError::Schema {
            path: path.to_string(),
            message: message.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    /// 2 for usage and schema problems, 3 for inadmissible initial states
    /// or leaders, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Schema { .. } => 2,
            CliError::Model(e) => model_code(e),
            CliError::Io { .. } | CliError::Json(_) => 1,
        }
    }
}

fn model_code(e: &hk_noise::Error) -> i32 {
    match e {
        hk_noise::Error::InvalidArgument(_) => 2,
        hk_noise::Error::InvalidInit(_) => 3,
        hk_noise::Error::Worker { source, .. } => model_code(source),
        _ => 1,
    }
}

pub type CliResult<T> = Result<T, CliError>;
