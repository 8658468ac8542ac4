use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument violates the operation's preconditions.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The protocol was driven out of order (e.g. a debate round without prior responses).
    #[error("protocol state: {0}")]
    ProtocolState(String),

    /// An exhaustive enumeration would exceed its size guard.
    #[error("enumeration too large: {0}")]
    Size(String),

    /// A verifier's preconditions do not hold for the supplied experiment.
    #[error("precondition rejected: {0}")]
    Precondition(String),
}

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
