use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("io error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed record at {location}: {reason}")]
    MalformedRecord { location: String, reason: String },

    #[error("invalid image dimensions {width}x{height}")]
    InvalidImage { width: f64, height: f64 },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid split request: {0}")]
    InvalidSplit(String),

    #[error("unknown {role} token {token:?}")]
    UnknownToken { role: &'static str, token: String },

    #[error("embedding file line {line}: expected {expected} values, found {found}")]
    EmbeddingDim {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("embedding file line {line}: {reason}")]
    EmbeddingParse { line: usize, reason: String },

    #[error("{count} vocabulary tokens missing from pretrained vectors: {sample:?}")]
    MissingEmbeddings { count: usize, sample: Vec<String> },

    #[error("invalid embedding request: {0}")]
    InvalidEmbedding(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("head mismatch: model is {actual}, requested {expected}")]
    HeadMismatch {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("unknown strategy {kind} {name:?} (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("provenance mismatch: model stoplist hash {model}, corpus stoplist hash {corpus}")]
    Provenance { model: String, corpus: String },

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid scene: {0}")]
    Scene(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
