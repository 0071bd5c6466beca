use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("index {index} out of range for {what} of size {len}")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("non-finite value in {0}")]
    Numeric(String),
    #[error("not enough input: {0}")]
    EmptyInput(String),
    #[error("timestamps out of order at sample {index}")]
    Ordering { index: usize },
    #[error("no fixation available to cover frames")]
    Coverage,
    #[error("patch outside frame: {0}")]
    Bounds(String),
    #[error("unknown {kind} `{name}`")]
    Vocabulary { kind: &'static str, name: String },
    #[error("format error at {location}: {message}")]
    Format { location: String, message: String },
    #[error("missing key {0}")]
    MissingKey(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
