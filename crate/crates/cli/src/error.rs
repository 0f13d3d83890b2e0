use impact_harvest::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or inconsistent configuration. Exit code 2.
    #[error("config error: {0}")]
    Config(String),

    /// A computation failed. Exit code 3; details go to the diagnostics file.
    #[error("numerical failure: {message}")]
    Numerical {
        message: String,
        context: serde_json::Value,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn numerical(err: CoreError, context: serde_json::Value) -> Self {
        CliError::Numerical {
            message: err.to_string(),
            context,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

/// Core errors raised while running: domain errors point at the input,
/// everything else is a numerical failure.
impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Domain(msg) => CliError::Config(msg),
            CoreError::Io(io) => CliError::Io(io),
            other => CliError::numerical(other, serde_json::Value::Null),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
