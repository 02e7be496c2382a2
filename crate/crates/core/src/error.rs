use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("hashtag {0:?} is empty after normalization")]
    DegenerateHashtag(String),

    #[error("malformed record at line {line}: {message}")]
    Record { line: usize, message: String },

    #[error("corpus is empty after filtering")]
    EmptyCorpus,

    #[error("channel has no enabled relations")]
    EmptyChannel,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },

    #[error("non-finite value encountered: {0}")]
    Numerics(String),

    #[error("no users interact with annotated hashtags")]
    EmptyEligibleSet,

    #[error("nothing to evaluate")]
    EmptyEvaluation,

    #[error("out of bounds: {0}")]
    Bounds(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Short stable identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateHashtag(_) => "degenerate_hashtag",
            Error::Record { .. } => "record",
            Error::EmptyCorpus => "empty_corpus",
            Error::EmptyChannel => "empty_channel",
            Error::Shape(_) => "shape",
            Error::Index { .. } => "index",
            Error::Numerics(_) => "numerics",
            Error::EmptyEligibleSet => "empty_eligible_set",
            Error::EmptyEvaluation => "empty_evaluation",
            Error::Bounds(_) => "bounds",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => "missing_file",
            Error::Io { .. } => "io",
        }
    }

    /// Process exit status for the command-line tool. 2 is left to usage
    /// errors from argument parsing.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => 3,
            Error::Io { .. } => 4,
            Error::Parse { .. } | Error::Record { .. } | Error::DegenerateHashtag(_) => 5,
            Error::Config(_) => 6,
            Error::Bounds(_) => 7,
            Error::Numerics(_) => 8,
            Error::EmptyCorpus | Error::EmptyChannel | Error::EmptyEligibleSet | Error::EmptyEvaluation => 9,
            Error::Shape(_) | Error::Index { .. } => 10,
        }
    }
}
