//! Corpus construction and evaluation toolkit for domain-adapted
//! clinical speech recognition.
//!
//! The crate covers the full offline loop around an external ASR engine:
//! building synthetic speech corpora through a TTS provider contract,
//! noise augmentation at controlled SNR, blind SNR estimation, acoustic
//! variability analysis (MFCC + t-SNE), transcription metrics (CER,
//! BLEU-1, BERTScore, medical-term accuracy, RTF), a stratified
//! evaluation harness, and checkpoint selection/averaging.
//!
//! Start from the `examples/` directory: each example is a runnable tour
//! of one capability. The `clinasr` binary exposes the same pipeline as
//! scriptable subcommands.

pub mod audio;
pub mod checkpoints;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod features;
pub mod harness;
pub mod metrics;
pub mod snr;
pub(crate) mod pool;
pub mod subproc;
pub mod textnorm;

pub use error::{Error, Result};
