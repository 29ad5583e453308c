use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("answer {answer:?} not found in context (wanted occurrence {occurrence})")]
    AnswerNotFound { answer: String, occurrence: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("backend error on request {index}: {message}")]
    Backend { index: usize, message: String },

    #[error("backend failure: {0}")]
    BackendUnavailable(String),

    #[error("unknown backend spec {0:?}")]
    UnknownBackend(String),

    #[error("sentence {sentence}: {source}")]
    Sentence {
        sentence: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("ids missing from predictions: {missing:?}; ids without gold answers: {extra:?}")]
    IdMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("domain mismatch: {0:?}")]
    DomainMismatch(Vec<String>),

    #[error("no usable training pairs after filtering ({dropped} dropped)")]
    EmptyDataset { dropped: usize },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn at_sentence(self, sentence: usize) -> Self {
        Error::Sentence {
            sentence,
            source: Box::new(self),
        }
    }
}
