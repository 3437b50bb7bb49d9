//! Acoustic features for inter-center variability analysis: MFCC
//! extraction, utterance-level pooling, and exact 2-D t-SNE projection.

mod mfcc;
mod tsne;

pub use mfcc::{
    compute_mfcc, dct_ii, dct_iii, hz_to_mel, mel_band_edges, mel_filterbank, mel_to_hz,
    utterance_embedding, FeatureMatrix, MfccConfig,
};
pub use tsne::{tsne_project, Embedding2D, TsneConfig, TsneOutput};
