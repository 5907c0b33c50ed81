use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown environment id `{0}`")]
    UnknownEnv(String),

    #[error("unknown method or variant id `{0}`")]
    UnknownMethod(String),

    #[error("step called on a finished episode (step {step_index})")]
    EpisodeDone { step_index: usize },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("relay tuning failed: {0}")]
    Tuning(String),

    #[error("non-finite loss in {what}: {diagnostics}")]
    NonFiniteLoss { what: &'static str, diagnostics: String },

    #[error("missing gains file {0}")]
    MissingGains(PathBuf),

    #[error("record set mixes configurations: {0}")]
    MixedConfig(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
