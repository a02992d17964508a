use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("unsupported sample rate {0} Hz (feature extraction requires 16000 Hz)")]
    UnsupportedSampleRate(u32),
    #[error("unsupported video frame rate {0} (accepted range is 23 to 30 fps)")]
    UnsupportedFrameRate(String),
    #[error("invalid mel filter spec: {0}")]
    InvalidFilterSpec(String),
    #[error("shape mismatch: {0}")]
    ShapeError(String),
    #[error("configuration error: {0}")]
    ConfigError(String),
    #[error("at least one of the audio and video switches must be on")]
    InvalidSwitchState,
    #[error("grapheme {0:?} is not in the inventory")]
    UnknownGrapheme(char),
    #[error("label {label} out of range for inventory of size {size}")]
    InvalidLabel { label: usize, size: usize },
    #[error("cannot align {labels} labels to zero frames")]
    ImpossibleAlignment { labels: usize },
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),
    #[error("training diverged at step {step}: {reason}")]
    Divergence { step: usize, reason: String },
    #[error("speech signal has zero energy; SNR is undefined")]
    DegenerateSnr,
    #[error("confidence interval needs at least two utterances")]
    UndefinedCi,
    #[error("missing face metadata field `{0}`")]
    MissingMetadata(&'static str),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("malformed container {path}: {reason}")]
    Format { path: String, reason: String },
    #[error("checksum mismatch for entry `{0}`")]
    Checksum(String),
    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeError(msg.into())
    }

    /// Process exit code: 1 usage, 2 data error, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigError(_) | Error::InvalidSwitchState | Error::IncompatibleCheckpoint(_) => 1,
            Error::NonFiniteGradient(_)
            | Error::Divergence { .. }
            | Error::DegenerateSnr
            | Error::UndefinedCi
            | Error::ImpossibleAlignment { .. } => 3,
            _ => 2,
        }
    }
}
