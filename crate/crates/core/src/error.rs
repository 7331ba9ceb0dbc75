use alloc::string::String;

/// Errors raised by samplers, extractors and law evaluators.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument violates the operation's precondition.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },
    /// A law was evaluated outside its support, or an extractor got an object
    /// it cannot handle (e.g. a tree without extant leaves).
    #[error("domain error: {0}")]
    Domain(String),
    /// A path, tree or point-process is malformed.
    #[error("format error: {0}")]
    Format(String),
    /// A rejection loop ran out of attempts.
    #[error("{what}: gave up after {attempts} attempts")]
    Resource { what: &'static str, attempts: u64 },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
