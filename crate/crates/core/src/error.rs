use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A precondition on the arguments was violated.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// An integrand or loss produced a non-finite value where a finite one is required.
    #[error("evaluation failed at {node}: {message}")]
    Evaluation { message: String, node: String },
    /// A text descriptor could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn eval(message: impl Into<String>, node: impl ToString) -> Self {
        Error::Evaluation { message: message.into(), node: node.to_string() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
