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

    /// A record in a line-delimited input file violates its schema.
    #[error("{path}:{line}: field `{field}`: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        field: String,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("no word vector for any token of `{0}`")]
    OutOfVocabulary(String),

    #[error("backend failure: {0}")]
    Backend(String),

    #[error("no region proposals for image(s): {}", .0.join(", "))]
    MissingRegions(Vec<String>),

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("no judgments for {} report key(s): {}", .0.len(), .0.join(", "))]
    Join(Vec<String>),

    #[error("malformed artifact {path}: {message}")]
    Artifact { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(
        path: impl Into<PathBuf>,
        line: usize,
        field: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Schema {
            path: path.into(),
            line,
            field: field.into(),
            message: message.into(),
        }
    }
}
