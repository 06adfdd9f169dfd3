use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("duplicate id: {0}")]
    DuplicateId(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("invalid split ratios: {0}")]
    Ratio(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("persona mode {persona} does not match template mode {template}")]
    ModeMismatch { persona: String, template: String },

    #[error("placeholder error: {0}")]
    Placeholder(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("backend error: {0}")]
    Backend(String),

    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("unknown annotator: {0}")]
    UnknownAnnotator(String),

    #[error("missing annotation for annotator {annotator} on instance {instance}")]
    MissingAnnotation { annotator: String, instance: String },

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("no training data: {0}")]
    NoTrainData(String),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("no correspondence for annotator {0}")]
    Correspondence(String),

    #[error("cache integrity failure for {0}")]
    CacheIntegrity(String),

    #[error("artifact digest mismatch: {0}")]
    DigestMismatch(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }

    /// Transport failures may succeed on retry; everything else is final.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Transport(_))
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Transport(_) | Error::Backend(_) => 3,
            _ => 4,
        }
    }
}
