use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid audio mode: {0}")]
    InvalidMode(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("no measured path available for session {0}")]
    NoPath(String),
    #[error("snapshot has no estimate for active path {0}")]
    StaleSnapshot(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("mode {mode} is not supported by user {user}")]
    ModeMismatch { user: String, mode: String },
    #[error("mode index {requested} is below the floor index {floor}")]
    FloorViolation { requested: usize, floor: usize },
    #[error("trace is empty")]
    EmptyTrace,
    #[error("trace format error: {0}")]
    TraceFormat(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
