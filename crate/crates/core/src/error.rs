use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported resolution {0}")]
    UnsupportedResolution(usize),

    #[error("sample counts must be positive")]
    ZeroCount,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("resolution mismatch: model expects {expected}x{expected}, got {got}x{got}")]
    ResolutionMismatch { expected: usize, got: usize },

    #[error("manifest not found at {0}")]
    MissingManifest(PathBuf),

    #[error("no usable images in {0}")]
    EmptyFolder(PathBuf),

    #[error("anomaly pool holds {available} samples but {needed} are required")]
    InsufficientAnomalies { needed: usize, available: usize },

    #[error("normal pool holds {available} samples but {needed} are required")]
    InsufficientNormals { needed: usize, available: usize },

    #[error("training stream is empty")]
    EmptyStream,

    #[error("inconsistent phase schedule: {0}")]
    PhaseSchedule(String),

    #[error("non-finite value during training: {0}")]
    NonFinite(String),

    #[error("model is still mid-training (resolution {resolution}, fade {fade})")]
    NotFrozen { resolution: usize, fade: f64 },

    #[error("discriminator parameters are not present in this bundle")]
    MissingDiscriminator,

    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("checkpoint tensor `{0}` is truncated")]
    Truncated(String),

    #[error("checkpoint tensor `{0}` failed digest verification")]
    DigestMismatch(String),

    #[error("ROC needs at least one sample of each label")]
    SingleClass,

    #[error("empty input set")]
    EmptySet,

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), message: message.into() }
    }
}
