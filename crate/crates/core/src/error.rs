use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input failed validation (bad geometry, bad manifest, out-of-range parameter).
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("not found: {0}")]
    NotFound(String),

    /// Duplicate or stale write (idempotency mismatch, optimistic sequence check, clue already decided).
    #[error("conflict: {0}")]
    Conflict(String),

    /// The workflow state machine refused an action.
    #[error("illegal transition: action `{action}` is not allowed in state {state}")]
    IllegalTransition { state: String, action: String },

    /// A domain rule refused the action (e.g. clue actions on a control-arm job).
    #[error("rejected: {0}")]
    Rejected(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn not_found(msg: impl Into<String>) -> Self {
        Error::NotFound(msg.into())
    }

    pub(crate) fn conflict(msg: impl Into<String>) -> Self {
        Error::Conflict(msg.into())
    }

    pub(crate) fn rejected(msg: impl Into<String>) -> Self {
        Error::Rejected(msg.into())
    }

    /// Stable machine-readable error code used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Invalid(_) => "validation_error",
            Error::NotFound(_) => "not_found",
            Error::Conflict(_) => "conflict",
            Error::IllegalTransition { .. } => "illegal_transition",
            Error::Rejected(_) => "rejected",
            Error::Io(_) => "io_error",
            Error::Json(_) => "malformed_document",
        }
    }
}
