use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("duplicate utterance id `{0}`")]
    DuplicateId(String),

    #[error("unsupported audio in {path}: {msg}")]
    Audio { path: PathBuf, msg: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("utterance `{id}`: {source}")]
    Utterance {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage `{stage}` requires stage `{missing}` to have run first")]
    MissingStage {
        stage: &'static str,
        missing: &'static str,
    },

    #[error("CMOS matrix: {0}")]
    Cmos(String),

    #[error("state file {path}: {source}")]
    State {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn for_utterance(self, id: &str) -> Self {
        match self {
            e @ Error::Utterance { .. } => e,
            other => Error::Utterance {
                id: id.to_string(),
                source: Box::new(other),
            },
        }
    }
}
