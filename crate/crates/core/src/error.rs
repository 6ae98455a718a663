//! Error types shared across the pipeline.

use thiserror::Error;

/// Errors produced by segmentation, backends, and the sanitization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Input rejected before any processing (empty text, bad ranges, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Word/token alignment failed; the tokenizer and segmenter disagree.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// A model backend failed or returned data violating its contract.
    #[error("backend error: {0}")]
    Backend(String),

    /// Input exceeds a backend's context window.
    #[error("length error: {0}")]
    Length(String),

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed or inconsistent data files (schema violations, id mismatches).
    #[error("data error: {0}")]
    Data(String),

    /// An error that occurred while processing a specific prompt.
    #[error("prompt {id}: {source}")]
    Prompt {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Attach a prompt id to an error bubbling out of per-prompt processing.
    pub fn for_prompt(self, id: &str) -> Error {
        match self {
            Error::Prompt { .. } => self,
            other => Error::Prompt {
                id: id.to_string(),
                source: Box::new(other),
            },
        }
    }

    /// Stable machine-readable kind tag, used in CLI error records and exit codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Alignment(_) => "alignment",
            Error::Backend(_) => "backend",
            Error::Length(_) => "length",
            Error::Config(_) => "config",
            Error::Data(_) => "data",
            Error::Prompt { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_wrapping_is_idempotent() {
        let err = Error::Backend("boom".into()).for_prompt("p1").for_prompt("p2");
        match &err {
            Error::Prompt { id, .. } => assert_eq!(id, "p1"),
            other => panic!("unexpected: {other:?}"),
        }
        assert_eq!(err.kind(), "backend");
    }
}
