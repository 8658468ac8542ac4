use thiserror::Error;

pub type Result<T, E = LlmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The response carried no `{final answer: ...}` marker, or an empty one.
    #[error("no final answer could be extracted: {0}")]
    Extraction(String),

    /// Non-success HTTP status.
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },

    #[error("request timed out: {0}")]
    Timeout(String),

    /// Connection-level failure before a status line arrived.
    #[error("transport failure: {0}")]
    Transport(String),

    /// The body was not a chat-completion response.
    #[error("malformed response: {0}")]
    Protocol(String),

    #[error(transparent)]
    Core(#[from] mad_core::Error),
}

impl LlmError {
    /// Whether a retry may succeed: timeouts, connection failures, 429 and 5xx.
    pub fn is_transient(&self) -> bool {
        match self {
            Self::Timeout(_) | Self::Transport(_) => true,
            Self::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}
