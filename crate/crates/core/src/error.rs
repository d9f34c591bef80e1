use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("pulses overlap at t = {0}")]
    OverlappingPulses(f64),

    #[error("invalid spike train: {0}")]
    InvalidTrain(String),

    #[error("image is not binary: value {0} at pixel {1}")]
    NonBinaryImage(u8, usize),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("cannot build distinct patterns at scale {0}")]
    PatternsIndistinct(String),

    #[error("pattern file: {0}")]
    PatternFile(String),

    #[error("empty test set")]
    EmptyTestSet,

    #[error("read pulse disturbs device by {0:e} relative (limit {1:e})")]
    ReadDisturb(f64, f64),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("config: {0}")]
    Config(String),

    #[error("report: {0}")]
    Report(String),
}

pub type Result<T> = std::result::Result<T, Error>;
