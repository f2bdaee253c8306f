use std::path::PathBuf;

use thiserror::Error;

/// Broad failure classes, used by the command line to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Io,
    Numeric,
    Statistics,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::Io => "io",
            Category::Numeric => "numeric",
            Category::Statistics => "statistics",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("simulation would produce ~{expected} tags, above the budget of {budget}")]
    SizeLimit { expected: u64, budget: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed tag data: {0}")]
    Format(String),

    #[error("stream is not time ordered at record {index}")]
    Unsorted { index: usize },

    #[error("channel {0} is not present in the stream")]
    UnknownChannel(u8),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("cannot estimate: {0}")]
    Statistics(String),
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> Category {
        match self {
            Error::Invalid { .. } | Error::Parse(_) | Error::SizeLimit { .. } => Category::Config,
            Error::Io { .. } | Error::Format(_) | Error::Unsorted { .. } => Category::Io,
            Error::UnknownChannel(_) => Category::Config,
            Error::Numeric(_) => Category::Numeric,
            Error::Statistics(_) => Category::Statistics,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
