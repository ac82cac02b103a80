use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid dataset: {0}")]
    Validation(String),
    #[error("xml: {0}")]
    Xml(String),
    #[error("contingency table has no observations")]
    EmptyTable,
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("training vector {0} has no sense label")]
    Unlabeled(String),
    #[error("feature vector has length {found}, model expects {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("nothing to combine")]
    EmptyVote,
    #[error("unknown system {name:?} for language {language:?}")]
    UnknownSystem { name: String, language: String },
    #[error("instances missing from key: {}", .0.join(", "))]
    MissingKey(Vec<String>),
    #[error("answer sets cover different instances: {0}")]
    CoverageMismatch(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error("serialization: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Wraps the error with a short description of what was being done.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
