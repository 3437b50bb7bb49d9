//! Blind SNR estimation on controlled mixtures: speech-shaped signals
//! mixed with white noise at known SNRs, then estimated without any
//! reference.
//!
//! Run with: `cargo run --example estimate_snr`

use clinasr::audio::{mix_at_snr, NoiseClip, Waveform};
use clinasr::snr::{estimate_snr_wada, synth_speech_shaped};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn white_noise(n: usize, rms: f64, seed: u64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, rms).unwrap();
    Waveform::new(
        (0..n).map(|_| normal.sample(&mut rng).clamp(-1.0, 1.0)).collect(),
        16000,
    )
    .unwrap()
}

fn main() -> clinasr::Result<()> {
    let speech = synth_speech_shaped(32000, 0.05, 1, 16000);
    let noise = NoiseClip::new(white_noise(32000, 0.05, 2), "white")?;

    println!("true SNR -> blind estimate (gain statistic)");
    for target in [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0] {
        let mixed = mix_at_snr(&speech, &noise, target)?;
        let estimate = estimate_snr_wada(&mixed.waveform)?;
        println!(
            "  {target:5.1} dB -> {:6.2} dB  (statistic {:.4}, noise gain {:.4})",
            estimate.snr_db, estimate.gain_statistic, mixed.noise_gain
        );
    }

    let clean = estimate_snr_wada(&speech)?;
    println!("clean speech-shaped signal -> {:.1} dB", clean.snr_db);
    let pure = estimate_snr_wada(&white_noise(32000, 0.05, 3))?;
    println!("pure white noise          -> {:.1} dB", pure.snr_db);
    Ok(())
}
