use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Unified error type for the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad wav file {path}: {reason}")]
    Wav { path: PathBuf, reason: String },

    #[error("waveform is empty")]
    EmptyWaveform,

    #[error("waveform contains non-finite or out-of-range samples: {0}")]
    InvalidWaveform(String),

    #[error("sample rate mismatch: {left} Hz vs {right} Hz")]
    SampleRateMismatch { left: u32, right: u32 },

    #[error("{what} signal is silent (power at or below the -120 dBFS floor)")]
    SilentSignal { what: &'static str },

    #[error("input too short: {got:.3} s, need at least {min:.3} s")]
    TooShort { got: f64, min: f64 },

    #[error("invalid SNR schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("reference is empty after normalization")]
    EmptyReference,

    #[error("embedding list is empty")]
    EmptyEmbeddingList,

    #[error("embedding {index} has norm {norm}, expected unit length")]
    NonUnitEmbedding { index: usize, norm: f64 },

    #[error("embedding dimension mismatch: {0} vs {1}")]
    EmbeddingDimMismatch(usize, usize),

    #[error("no embeddings stored for utterance {id} ({role})")]
    MissingEmbedding { id: String, role: String },

    #[error("audio duration must be positive, got {0}")]
    NonPositiveAudio(f64),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("lexicon error: {0}")]
    Lexicon(String),

    #[error("tts provider failure for text {index}: {reason}")]
    Provider { index: usize, reason: String },

    #[error("transcriber adapter {adapter}: {reason}")]
    Adapter { adapter: String, reason: String },

    #[error("run has {0} failed utterances; pass the failure override to report anyway")]
    RunHasFailures(usize),

    #[error("run is not scored yet")]
    RunNotScored,

    #[error("unknown stratification axis: {0}")]
    UnknownAxis(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("parse error in {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
