//! MFCC extraction: pre-emphasis, Hamming-windowed frames, power
//! spectrum, triangular mel filterbank (HTK scale), log with floor, and
//! an orthonormal DCT-II keeping the leading coefficients (c0 included).

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::error::{Error, Result};

/// Log floor applied to filterbank energies.
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    pub frame_length_ms: f64,
    pub frame_shift_ms: f64,
    pub fft_size: usize,
    pub n_mel_filters: usize,
    pub n_coefficients: usize,
    pub pre_emphasis: f64,
    pub low_freq_hz: f64,
    /// Upper filterbank edge; `None` means the Nyquist frequency.
    pub high_freq_hz: Option<f64>,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            frame_length_ms: 25.0,
            frame_shift_ms: 10.0,
            fft_size: 512,
            n_mel_filters: 26,
            n_coefficients: 13,
            pre_emphasis: 0.97,
            low_freq_hz: 0.0,
            high_freq_hz: None,
        }
    }
}

impl MfccConfig {
    pub fn frame_samples(&self, sample_rate_hz: u32) -> usize {
        (self.frame_length_ms / 1000.0 * sample_rate_hz as f64).round() as usize
    }

    pub fn shift_samples(&self, sample_rate_hz: u32) -> usize {
        (self.frame_shift_ms / 1000.0 * sample_rate_hz as f64).round() as usize
    }

    pub fn high_freq(&self, sample_rate_hz: u32) -> f64 {
        self.high_freq_hz.unwrap_or(sample_rate_hz as f64 / 2.0)
    }

    pub fn validate(&self, sample_rate_hz: u32) -> Result<()> {
        let frame = self.frame_samples(sample_rate_hz);
        let shift = self.shift_samples(sample_rate_hz);
        if frame == 0 || shift == 0 {
            return Err(Error::InvalidConfig("frame and shift must be positive".into()));
        }
        if self.fft_size < frame {
            return Err(Error::InvalidConfig(format!(
                "fft_size {} smaller than frame of {frame} samples",
                self.fft_size
            )));
        }
        if self.n_coefficients == 0 || self.n_coefficients > self.n_mel_filters {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= n_coefficients ({}) <= n_mel_filters ({})",
                self.n_coefficients, self.n_mel_filters
            )));
        }
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            return Err(Error::InvalidConfig("pre_emphasis must be in [0, 1)".into()));
        }
        let high = self.high_freq(sample_rate_hz);
        if !(self.low_freq_hz >= 0.0 && self.low_freq_hz < high)
            || high > sample_rate_hz as f64 / 2.0
        {
            return Err(Error::InvalidConfig(format!(
                "filterbank range [{}, {high}] invalid for rate {sample_rate_hz}",
                self.low_freq_hz
            )));
        }
        Ok(())
    }
}

/// Rectangular frame-by-coefficient matrix, all values finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl FeatureMatrix {
    pub fn new(data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidConfig(format!(
                "feature matrix data length {} != {rows}x{cols}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("feature matrix has non-finite values".into()));
        }
        Ok(Self { data, rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }
}

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// The `n_mel_filters + 2` Hz grid points, equally spaced on the mel
/// scale. Point `m+1` is the peak of filter `m` and simultaneously the
/// lower edge of filter `m+1`, so adjacent triangles share exactly one
/// boundary frequency.
pub fn mel_band_edges(cfg: &MfccConfig, sample_rate_hz: u32) -> Vec<f64> {
    let lo = hz_to_mel(cfg.low_freq_hz);
    let hi = hz_to_mel(cfg.high_freq(sample_rate_hz));
    let n = cfg.n_mel_filters + 2;
    (0..n)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Triangular filterbank, `n_mel_filters` rows over `fft_size/2 + 1`
/// power-spectrum bins, unit peak per filter.
pub fn mel_filterbank(cfg: &MfccConfig, sample_rate_hz: u32) -> Vec<Vec<f64>> {
    let edges = mel_band_edges(cfg, sample_rate_hz);
    let n_bins = cfg.fft_size / 2 + 1;
    let bin_hz = sample_rate_hz as f64 / cfg.fft_size as f64;
    (0..cfg.n_mel_filters)
        .map(|m| {
            let (left, peak, right) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..n_bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f > left && f < peak {
                        (f - left) / (peak - left)
                    } else if f == peak {
                        1.0
                    } else if f > peak && f < right {
                        (right - f) / (right - peak)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II of `input`, truncated to `n_out` coefficients.
pub fn dct_ii(input: &[f64], n_out: usize) -> Vec<f64> {
    let m = input.len() as f64;
    (0..n_out)
        .map(|j| {
            let scale = if j == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
            scale
                * input
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| {
                        x * (std::f64::consts::PI * j as f64 * (2.0 * i as f64 + 1.0) / (2.0 * m))
                            .cos()
                    })
                    .sum::<f64>()
        })
        .collect()
}

/// Orthonormal DCT-III (inverse of [`dct_ii`] on a full coefficient set).
pub fn dct_iii(coeffs: &[f64], n_out: usize) -> Vec<f64> {
    let m = n_out as f64;
    (0..n_out)
        .map(|i| {
            coeffs
                .iter()
                .enumerate()
                .map(|(j, &c)| {
                    let scale = if j == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
                    scale
                        * c
                        * (std::f64::consts::PI * j as f64 * (2.0 * i as f64 + 1.0) / (2.0 * m))
                            .cos()
                })
                .sum()
        })
        .collect()
}

/// Extracts an MFCC matrix, one row per frame.
pub fn compute_mfcc(w: &Waveform, cfg: &MfccConfig) -> Result<FeatureMatrix> {
    let rate = w.sample_rate_hz();
    cfg.validate(rate)?;
    let frame_len = cfg.frame_samples(rate);
    let shift = cfg.shift_samples(rate);
    if w.len() < frame_len {
        return Err(Error::TooShort {
            got: w.duration_seconds(),
            min: frame_len as f64 / rate as f64,
        });
    }

    // pre-emphasis over the whole signal; first sample passes through
    let x = w.samples();
    let mut emphasized = Vec::with_capacity(x.len());
    emphasized.push(x[0]);
    for i in 1..x.len() {
        emphasized.push(x[i] - cfg.pre_emphasis * x[i - 1]);
    }

    let window: Vec<f64> = (0..frame_len)
        .map(|n| {
            0.54 - 0.46
                * (2.0 * std::f64::consts::PI * n as f64 / (frame_len as f64 - 1.0)).cos()
        })
        .collect();

    let bank = mel_filterbank(cfg, rate);
    let n_bins = cfg.fft_size / 2 + 1;
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(cfg.fft_size);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];

    let n_frames = (emphasized.len() - frame_len) / shift + 1;
    let mut data = Vec::with_capacity(n_frames * cfg.n_coefficients);
    for f in 0..n_frames {
        let start = f * shift;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = if i < frame_len {
                Complex::new(emphasized[start + i] * window[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..n_bins].iter().map(|c| c.norm_sqr()).collect();

        let log_energies: Vec<f64> = bank
            .iter()
            .map(|filter| {
                let e: f64 = filter.iter().zip(&power).map(|(w, p)| w * p).sum();
                e.max(LOG_FLOOR).ln()
            })
            .collect();
        data.extend(dct_ii(&log_energies, cfg.n_coefficients));
    }

    FeatureMatrix::new(data, n_frames, cfg.n_coefficients)
}

/// Pools a frame matrix to a fixed-length utterance vector: per-column
/// mean followed by per-column population standard deviation.
pub fn utterance_embedding(m: &FeatureMatrix) -> Result<Vec<f64>> {
    if m.rows() == 0 {
        return Err(Error::InvalidConfig("feature matrix has no frames".into()));
    }
    let cols = m.cols();
    let n = m.rows() as f64;
    let mut means = vec![0.0; cols];
    for row in m.iter_rows() {
        for (acc, v) in means.iter_mut().zip(row) {
            *acc += v;
        }
    }
    for acc in &mut means {
        *acc /= n;
    }
    let mut vars = vec![0.0; cols];
    for row in m.iter_rows() {
        for ((acc, v), mean) in vars.iter_mut().zip(row).zip(&means) {
            let d = v - mean;
            *acc += d * d;
        }
    }
    let mut out = means.clone();
    out.extend(vars.iter().map(|v| (v / n).sqrt()));
    Ok(out)
}
