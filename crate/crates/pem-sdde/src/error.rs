use thiserror::Error;

/// Errors produced by grid construction, integration, parsing and analysis.
#[derive(Debug, Error)]
pub enum SddeError {
    /// A precondition on an argument was violated (bad dimensions, steps that
    /// do not divide the delay, non-positive parameters, and so on).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Integration produced a NaN or infinite state component. `step` is the
    /// one-based index of the step that produced it (0 for a standalone step
    /// evaluation outside a grid loop).
    #[error("non-finite state produced at step {step}")]
    NonFiniteState { step: usize },

    /// Expression or problem-file syntax error. `offset` is the byte offset
    /// into the source at which the error was detected.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// A required key is absent from a problem file.
    #[error("missing key `{0}` in problem file")]
    MissingKey(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SddeError>;

impl SddeError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SddeError::InvalidArgument(msg.into())
    }
}
