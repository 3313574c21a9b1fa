use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("missing parameter `{0}` for the selected method")]
    MissingParameter(&'static str),

    #[error("worker index {worker} out of range for {workers} workers")]
    WorkerOutOfRange { worker: usize, workers: usize },

    #[error("cursor belongs to worker {cursor_worker}, not worker {worker}")]
    ForeignCursor { worker: usize, cursor_worker: usize },

    #[error("step index {index} out of range (limit {limit})")]
    StepIndexOutOfRange { index: u64, limit: u64 },

    #[error("node {0} does not exist in the computation tree")]
    DanglingNode(u64),

    #[error("computation tree has no tagged main branch")]
    UntaggedMainBranch,

    #[error("malformed tree main branch: {0}")]
    MalformedMainBranch(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("unknown {kind} `{value}`")]
    Unknown { kind: &'static str, value: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
