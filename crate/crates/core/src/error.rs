//! Error types shared across the crate.

use thiserror::Error;

/// Everything the pipeline can fail with.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}: {detail}")]
    Parse { row: usize, detail: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("argument error: {0}")]
    Argument(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("translation unavailable for ({lang}, {text:?}): {detail}")]
    TranslationUnavailable {
        lang: String,
        text: String,
        detail: String,
    },

    #[error("rendering error for record {id}: {detail}")]
    Render { id: String, detail: String },

    #[error("routing error: no ensemble for language(s) {0:?}")]
    Routing(Vec<String>),

    #[error("coverage error: missing predictions for ids {0:?}")]
    Coverage(Vec<String>),

    #[error("adapter contract violation: {0}")]
    AdapterContract(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: non-finite loss")]
    Divergence { epoch: usize, batch: usize },

    #[error("storage error: {0}")]
    Storage(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable one-word category, emitted by the CLI on failure.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
            Error::Argument(_) => "argument",
            Error::Protocol(_) => "protocol",
            Error::TranslationUnavailable { .. } => "translation",
            Error::Render { .. } => "render",
            Error::Routing(_) => "routing",
            Error::Coverage(_) => "coverage",
            Error::AdapterContract(_) => "adapter",
            Error::Divergence { .. } => "divergence",
            Error::Storage(_) => "storage",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
