use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("transport error: {0}")]
    Transport(String),

    #[error("provider capability: {0}")]
    Capability(String),

    #[error("provider returned an empty choice set")]
    EmptyResponse,

    #[error("provider returned {got} generations, expected {expected}")]
    GenerationCount { expected: usize, got: usize },

    #[error("replay cache has no entry for {0}")]
    ReplayMiss(String),

    #[error("cache corrupted: {0}")]
    CacheCorruption(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Dataset {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("report error: {0}")]
    Report(String),

    #[error(transparent)]
    Core(#[from] uq_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
