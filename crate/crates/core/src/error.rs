use std::io;

/// Errors produced by the event pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("bad header: {0}")]
    BadHeader(String),

    #[error("truncated input: {0}")]
    Truncated(String),

    #[error("malformed record {index}: {reason}")]
    MalformedRecord { index: usize, reason: String },

    #[error("event {index} out of range: ({x}, {y}) outside {width}x{height}")]
    OutOfRange {
        index: usize,
        x: u32,
        y: u32,
        width: u16,
        height: u16,
    },

    #[error("event {index} has invalid polarity {polarity}")]
    BadPolarity { index: usize, polarity: u32 },

    #[error("timestamp regression at event {index}: {t} < {prev}")]
    TimestampRegression { index: usize, t: u64, prev: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("inverted window: start {start} >= end {end}")]
    InvertedWindow { start: u64, end: u64 },

    #[error("token at grid ({row}, {col}) outside the {grid_h}x{grid_w} patch grid")]
    TokenOutOfGrid {
        row: usize,
        col: usize,
        grid_h: usize,
        grid_w: usize,
    },

    #[error("empty token list")]
    EmptyTokens,

    #[error("stream produced no windows; nothing to classify")]
    NoInformation,

    #[error("target class {target} out of range for {classes} classes")]
    TargetOutOfRange { target: usize, classes: usize },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
