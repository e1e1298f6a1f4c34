//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input data (question banks, profiles, scripts).
    #[error("ingestion error: {0}")]
    Ingestion(String),

    /// Ordinal index outside the taxonomy, or a broken taxonomy definition.
    #[error("taxonomy error: {0}")]
    Taxonomy(String),

    /// Invalid run configuration or usage.
    #[error("configuration error: {0}")]
    Config(String),

    /// Data that fails cross-validation against the question bank.
    #[error("validation error: {0}")]
    Validation(String),

    /// A prompt template is missing a required placeholder.
    #[error("template error: {0}")]
    Template(String),

    /// Retries against a provider were exhausted.
    #[error("transport error: {0}")]
    Transport(String),

    /// The provider answered but the reply is unusable (refusal, empty body).
    #[error("provider error: {0}")]
    Provider(String),

    /// A record cannot be scored (degenerate option range, non-scorable kind).
    #[error("scoring error: {0}")]
    Scoring(String),

    /// A statistical test has no defined answer on this input.
    #[error("degenerate-test error: {0}")]
    DegenerateTest(String),

    /// Embedding index construction or lookup failure.
    #[error("index error: {0}")]
    Index(String),

    /// Zero vectors have no defined cosine similarity.
    #[error("undefined-similarity error: {0}")]
    UndefinedSimilarity(String),

    /// A question kind the requested operation does not support.
    #[error("unsupported-question error: {0}")]
    UnsupportedQuestion(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
