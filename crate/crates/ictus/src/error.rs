use thiserror::Error;

/// Errors surfaced by the recording, feature, model, and detector layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed header: {0}")]
    Header(#[from] serde_json::Error),

    #[error("invalid recording: {0}")]
    InvalidRecording(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("segment is tagged excluded and carries no label")]
    ExcludedSegment,

    #[error("non-finite gradient; parameters left untouched")]
    NonFiniteGradient,
}

pub type Result<T> = std::result::Result<T, Error>;
