use thiserror::Error;

/// Failures that map onto the process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// The run completed but a checked property did not hold (exit 1).
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("precondition not met: {0}")]
    Precondition(String),
    #[error("run failed: {0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Verification(_) => 1,
            _ => 2,
        }
    }
}

impl From<mad_core::Error> for CliError {
    fn from(e: mad_core::Error) -> Self {
        match e {
            mad_core::Error::Precondition(m) => Self::Precondition(m),
            mad_core::Error::Parameter(m) => Self::Config(m),
            other => Self::Run(other.to_string()),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
