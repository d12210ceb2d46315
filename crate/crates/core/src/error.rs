use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: offsets {start}..{end} out of bounds for text of {len} characters")]
    Offset { line: usize, start: usize, end: usize, len: usize },

    #[error("line {line}: surface {found:?} does not match text {expected:?}")]
    SurfaceMismatch { line: usize, found: String, expected: String },

    #[error("unknown event class {class:?}{}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Class { class: String, line: Option<usize> },

    #[error("line {line}: malformed annotation: {reason}")]
    Malformed { line: usize, reason: String },

    #[error("duplicate mention {0}")]
    Duplicate(String),

    #[error("mention {mention} does not align to token boundaries: {reason}")]
    Alignment { mention: String, reason: String },

    #[error("overlapping mentions {0} and {1}")]
    Overlap(String, String),

    #[error("invalid split: {0}")]
    Split(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("validation failed with {} problem(s):\n{}", .0.len(), .0.join("\n"))]
    Validation(Vec<String>),

    #[error("merge rejected with {} violation(s): {}", .0.len(), .0.join("; "))]
    Merge(Vec<String>),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

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

    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::InFile { path: path.into(), source: Box::new(self) }
    }
}
