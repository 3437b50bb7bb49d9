//! Blind SNR estimation from waveform amplitude statistics.
//!
//! The estimator needs no noise reference: it measures the gap between
//! the log of the mean absolute amplitude and the mean of the log
//! absolute amplitude. Under a two-sided gamma speech-amplitude model
//! (shape 0.4) plus Gaussian noise, that gap is a strictly increasing
//! function of SNR, tabulated in `data/wada_gamma_table.tsv` and inverted
//! here by linear interpolation. The statistic is a difference of logs,
//! so it is invariant to overall gain.

use std::sync::OnceLock;

use crate::audio::{is_silent, Waveform};
use crate::error::{Error, Result};

/// Lower clamp of the estimate, dB.
pub const MIN_SNR_DB: f64 = -20.0;
/// Upper clamp of the estimate, dB.
pub const MAX_SNR_DB: f64 = 100.0;
/// Shortest input the estimator accepts, seconds.
pub const MIN_INPUT_SECONDS: f64 = 0.5;

/// Amplitude floor applied before taking logs, so zero samples cannot
/// produce -inf.
pub const AMPLITUDE_FLOOR: f64 = 1e-10;

const TABLE_TSV: &str = include_str!("../data/wada_gamma_table.tsv");

/// Blind estimate plus the intermediate amplitude statistic that was
/// looked up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrEstimate {
    /// Estimated SNR, clamped to `[-20, 100]` dB.
    pub snr_db: f64,
    /// The gap `ln(mean |x|) - mean(ln |x|)` that indexed the table.
    pub gain_statistic: f64,
}

fn table() -> &'static Vec<(f64, f64)> {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        TABLE_TSV
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|l| {
                let mut it = l.split('\t');
                let db: f64 = it.next().unwrap().parse().expect("table db");
                let g: f64 = it.next().unwrap().parse().expect("table statistic");
                (db, g)
            })
            .collect()
    })
}

/// Estimates the SNR of a recording from its amplitude distribution.
///
/// Whole-utterance estimation, one value per recording. Inputs shorter
/// than half a second or silent inputs are rejected.
pub fn estimate_snr_wada(w: &Waveform) -> Result<SnrEstimate> {
    let seconds = w.duration_seconds();
    if seconds < MIN_INPUT_SECONDS {
        return Err(Error::TooShort {
            got: seconds,
            min: MIN_INPUT_SECONDS,
        });
    }
    if is_silent(w) {
        return Err(Error::SilentSignal { what: "input" });
    }

    let n = w.len() as f64;
    let mut sum_abs = 0.0;
    let mut sum_log = 0.0;
    for &s in w.samples() {
        let a = s.abs();
        sum_abs += a;
        sum_log += a.max(AMPLITUDE_FLOOR).ln();
    }
    let statistic = (sum_abs / n).ln() - sum_log / n;

    Ok(SnrEstimate {
        snr_db: invert_statistic(statistic),
        gain_statistic: statistic,
    })
}

/// Maps the amplitude statistic to dB through the model table, clamping
/// outside the tabulated range.
pub fn invert_statistic(statistic: f64) -> f64 {
    let t = table();
    if statistic <= t[0].1 {
        return MIN_SNR_DB;
    }
    if statistic >= t[t.len() - 1].1 {
        return MAX_SNR_DB;
    }
    // table is strictly increasing in the statistic
    let idx = t.partition_point(|&(_, g)| g < statistic);
    let (db0, g0) = t[idx - 1];
    let (db1, g1) = t[idx];
    db0 + (statistic - g0) / (g1 - g0) * (db1 - db0)
}

/// Draws `n` samples from the table's speech model: a two-sided gamma
/// amplitude distribution with shape 0.4, scaled to the requested RMS.
/// Useful for simulation tests and demos; this is exactly the signal
/// family the estimator assumes.
pub fn synth_speech_shaped(n: usize, rms: f64, seed: u64, sample_rate_hz: u32) -> Waveform {
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma};

    const SHAPE: f64 = 0.4;
    let beta = (SHAPE * (SHAPE + 1.0)).sqrt(); // unit power at scale 1/beta
    let gamma = Gamma::new(SHAPE, 1.0 / beta).expect("fixed shape");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<f64> = (0..n)
        .map(|_| {
            let amp: f64 = gamma.sample(&mut rng) * rms;
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            (amp * sign).clamp(-1.0, 1.0)
        })
        .collect();
    Waveform::new(samples, sample_rate_hz).expect("clamped samples")
}
