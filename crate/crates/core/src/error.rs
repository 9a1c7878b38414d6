use std::io;

/// Errors raised anywhere in the toolkit.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("JPEG quality {0} is outside 1..=100")]
    InvalidQuality(i64),

    #[error("JPEG decode error at byte offset {offset}: {reason}")]
    Decode { offset: usize, reason: String },

    #[error("unsupported JPEG feature at byte offset {offset}: {reason}")]
    Unsupported { offset: usize, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch in layer `{layer}`: {detail}")]
    Shape { layer: String, detail: String },

    #[error("stale or missing forward cache: {0}")]
    StaleCache(String),

    #[error("training error at step {step}: {detail}")]
    Training { step: usize, detail: String },

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error("database corruption: {0}")]
    Corruption(String),

    #[error("rejected database write: {0}")]
    RejectedWrite(String),

    #[error("input error: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
