use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed structured representation: expected 3 '|' delimiters, found {found}")]
    SrDelimiters { found: usize },

    #[error("structured representation needs a non-empty context, question or relation slot")]
    EmptySr,

    #[error("no structured representation candidates")]
    NoCandidates,

    #[error("SR generator failed: {0}")]
    Generator(String),

    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate evidence id {0}")]
    DuplicateEvidence(String),

    #[error("missing score for evidence {0}")]
    MissingScore(String),

    #[error("cannot encode an empty token sequence")]
    EmptyTokens,

    #[error("graph has no {0} nodes")]
    EmptyGraph(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}, instance {instance}: loss = {loss}")]
    Diverged {
        epoch: usize,
        instance: usize,
        loss: f64,
    },

    #[error("no usable training instance (all {skipped} lacked a gold answer in the graph)")]
    NoTrainingData { skipped: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("checkpoint shape mismatch for {tensor}: expected {expected:?}, found {found:?}")]
    Shape {
        tensor: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
