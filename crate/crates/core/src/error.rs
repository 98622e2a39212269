use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not valid UTF-8 (line {line})")]
    Encoding { path: PathBuf, line: usize },
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate document id {id:?} at line {line}")]
    DuplicateId { id: String, line: usize },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty vocabulary (min_doc_freq = {min_doc_freq})")]
    EmptyVocabulary { min_doc_freq: usize },
    #[error("malformed topic set: {0}")]
    MalformedTopics(String),
    #[error("index format: {0}")]
    IndexFormat(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Provider(#[from] crate::rephrase::ProviderError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Encoding { .. } => "encoding",
            Error::MalformedRecord { .. } => "malformed_record",
            Error::DuplicateId { .. } => "duplicate_id",
            Error::EmptyCorpus => "empty_corpus",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::EmptyVocabulary { .. } => "empty_vocabulary",
            Error::MalformedTopics(_) => "malformed_topics",
            Error::IndexFormat(_) => "index_format",
            Error::Config(_) => "config",
            Error::Provider(_) => "provider",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
