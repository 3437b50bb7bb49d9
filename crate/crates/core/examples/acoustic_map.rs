//! Acoustic variability analysis: MFCC extraction, mean+std pooling per
//! utterance, and exact t-SNE down to 2-D. Two synthetic "centers" with
//! different spectral balance separate cleanly in the projection.
//!
//! Run with: `cargo run --release --example acoustic_map`

use clinasr::audio::Waveform;
use clinasr::features::{
    compute_mfcc, tsne_project, utterance_embedding, Embedding2D, MfccConfig, TsneConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Band-limited noise burst: a crude stand-in for one utterance.
fn utterance(center_low_band: bool, seed: u64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 8000;
    let (f0, f1) = if center_low_band {
        (300.0, 900.0)
    } else {
        (1500.0, 3200.0)
    };
    let mut samples = vec![0.0f64; n];
    for _ in 0..24 {
        let freq = rng.gen_range(f0..f1);
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let amp = rng.gen_range(0.005..0.02);
        for (i, s) in samples.iter_mut().enumerate() {
            *s += amp * (std::f64::consts::TAU * freq * i as f64 / 16000.0 + phase).sin();
        }
    }
    Waveform::new(samples, 16000).unwrap()
}

fn main() -> clinasr::Result<()> {
    let cfg = MfccConfig::default();
    let mut embeddings = Vec::new();
    let mut labels = Vec::new();
    for i in 0..40 {
        let low_band = i % 2 == 0;
        let wave = utterance(low_band, 100 + i);
        let mfcc = compute_mfcc(&wave, &cfg)?;
        embeddings.push(utterance_embedding(&mfcc)?);
        labels.push(if low_band { "C1" } else { "C2" }.to_string());
    }
    println!(
        "pooled {} utterances into {}-dim embeddings",
        embeddings.len(),
        embeddings[0].len()
    );

    let out = tsne_project(&embeddings, &TsneConfig::new(10.0, 600, 5))?;
    println!(
        "t-SNE finished, KL {:.4} -> {:.4}",
        out.kl_history.first().unwrap(),
        out.kl_history.last().unwrap()
    );

    let embedding = Embedding2D::new(out.points, labels)?;
    for (point, label) in embedding.points.iter().zip(&embedding.labels).take(10) {
        println!("  {label}: ({:8.2}, {:8.2})", point[0], point[1]);
    }

    // centroid gap as a quick separation readout
    let centroid = |want: &str| {
        let pts: Vec<&[f64; 2]> = embedding
            .points
            .iter()
            .zip(&embedding.labels)
            .filter(|(_, l)| l.as_str() == want)
            .map(|(p, _)| p)
            .collect();
        let n = pts.len() as f64;
        [
            pts.iter().map(|p| p[0]).sum::<f64>() / n,
            pts.iter().map(|p| p[1]).sum::<f64>() / n,
        ]
    };
    let (c1, c2) = (centroid("C1"), centroid("C2"));
    let gap = ((c1[0] - c2[0]).powi(2) + (c1[1] - c2[1]).powi(2)).sqrt();
    println!("centroid gap between centers: {gap:.2}");
    Ok(())
}
