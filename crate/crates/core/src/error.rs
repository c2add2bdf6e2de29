use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the pipeline.
#[derive(Debug, Error)]
pub enum CaprError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("i/o error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("empty log: no valid interaction records")]
    EmptyLog,

    #[error("empty corpus: every reformulation pair was dropped")]
    EmptyCorpus,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("backend error at {endpoint}: {message}")]
    Backend { endpoint: String, message: String },

    #[error("backend {endpoint} returned HTTP {status} after {attempts} attempt(s)")]
    HttpStatus {
        endpoint: String,
        status: u16,
        attempts: u32,
    },

    #[error("could not decode response from {endpoint}: {message}")]
    Decode { endpoint: String, message: String },

    #[error("while processing prompt {prompt:?}: {source}")]
    Prompt {
        prompt: String,
        #[source]
        source: Box<CaprError>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("search space has {points} points, above the brute-force cap of {cap}; use the GP tuner")]
    SpaceTooLarge { points: usize, cap: usize },

    #[error("too many failures: {failed} of {total} prompts failed")]
    TooManyFailures { failed: usize, total: usize },
}

impl CaprError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CaprError::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CaprError::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach the prompt being processed to an error.
    pub fn for_prompt(self, prompt: &str) -> Self {
        CaprError::Prompt {
            prompt: prompt.to_string(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = CaprError> = std::result::Result<T, E>;
