//! Shared helpers for the integration suites.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use clinasr::audio::Waveform;

pub fn gaussian_noise_wave(n: usize, rms: f64, seed: u64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, rms).unwrap();
    Waveform::new(
        (0..n).map(|_| normal.sample(&mut rng).clamp(-1.0, 1.0)).collect(),
        16000,
    )
    .unwrap()
}

/// Spearman rank correlation; average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ra = ranks(a);
    let rb = ranks(b);
    pearson(&ra, &rb)
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Mean silhouette coefficient of 2-D points under the given labels.
pub fn silhouette(points: &[[f64; 2]], labels: &[usize]) -> f64 {
    let n = points.len();
    let dist =
        |a: &[f64; 2], b: &[f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let mut total = 0.0;
    for i in 0..n {
        let mut same = Vec::new();
        let mut other = Vec::new();
        for j in 0..n {
            if i == j {
                continue;
            }
            if labels[i] == labels[j] {
                same.push(dist(&points[i], &points[j]));
            } else {
                other.push(dist(&points[i], &points[j]));
            }
        }
        let a = same.iter().sum::<f64>() / same.len() as f64;
        let b = other.iter().sum::<f64>() / other.len() as f64;
        total += (b - a) / a.max(b);
    }
    total / n as f64
}

/// Deterministic mixed-script token pool for metric fuzzing.
pub fn token_pool() -> Vec<String> {
    let mut pool: Vec<String> = "盲肠直乙状结息肉溃疡糜烂活检病理钛夹分毫米一二三四五"
        .chars()
        .map(|c| c.to_string())
        .collect();
    for w in ["emr", "esd", "bbps", "ok"] {
        pool.push(w.to_string());
    }
    for d in 0..10 {
        pool.push(d.to_string());
    }
    pool
}

/// Joins tokens with spaces between adjacent Latin-run tokens so the
/// string re-tokenizes to the same sequence.
pub fn join_tokens(tokens: &[String]) -> String {
    let starts_latin =
        |t: &str| t.chars().next().map(|c| c.is_ascii_alphabetic()).unwrap_or(false);
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 && starts_latin(&tokens[i - 1]) && starts_latin(t) {
            out.push(' ');
        }
        out.push_str(t);
    }
    out
}

pub fn random_tokens(rng: &mut ChaCha8Rng, pool: &[String], max_len: usize) -> Vec<String> {
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect()
}
