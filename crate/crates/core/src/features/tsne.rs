//! Exact (quadratic) t-SNE with perplexity calibration by per-point
//! binary search, early exaggeration, and momentum gradient descent.
//! Deliberately not Barnes-Hut: the corpora this toolkit projects are a
//! few hundred utterances, where the exact gradient is both fast and
//! deterministic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub seed: u64,
    pub learning_rate: f64,
    /// Factor applied to affinities during the exploration phase.
    pub early_exaggeration: f64,
    /// Iteration at which exaggeration ends.
    pub exaggeration_end: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    /// Iteration at which momentum switches to `final_momentum`.
    pub momentum_switch: usize,
}

impl TsneConfig {
    pub fn new(perplexity: f64, iterations: usize, seed: u64) -> Self {
        Self {
            perplexity,
            iterations,
            seed,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_end: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
        }
    }
}

/// Projection result: the 2-D points plus the KL divergence after every
/// iteration (true affinities, exaggeration excluded), which tests and
/// callers can use to check convergence.
#[derive(Debug, Clone)]
pub struct TsneOutput {
    pub points: Vec<[f64; 2]>,
    pub kl_history: Vec<f64>,
}

/// Labeled 2-D embedding, one point per utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding2D {
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<String>,
}

impl Embedding2D {
    pub fn new(points: Vec<[f64; 2]>, labels: Vec<String>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::InvalidConfig(format!(
                "{} points vs {} labels",
                points.len(),
                labels.len()
            )));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite embedding coordinate".into()));
        }
        Ok(Self { points, labels })
    }
}

const P_FLOOR: f64 = 1e-12;
const ENTROPY_TOL: f64 = 1e-5;
const BETA_SEARCH_STEPS: usize = 50;

/// Projects high-dimensional vectors to 2-D, deterministic per seed.
pub fn tsne_project(data: &[Vec<f64>], cfg: &TsneConfig) -> Result<TsneOutput> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 points, got {n}")));
    }
    if !cfg.perplexity.is_finite() || cfg.perplexity <= 0.0 || cfg.perplexity >= n as f64 {
        return Err(Error::InvalidConfig(format!(
            "perplexity {} must be in (0, n = {n})",
            cfg.perplexity
        )));
    }
    if cfg.iterations == 0 {
        return Err(Error::InvalidConfig("iterations must be positive".into()));
    }
    let dim = data[0].len();
    if data.iter().any(|v| v.len() != dim) {
        return Err(Error::InvalidConfig("input vectors have mixed dimensions".into()));
    }
    if data.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("non-finite input vector".into()));
    }

    let d2 = squared_distances(data, n);
    let p = joint_affinities(&d2, n, cfg.perplexity);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = Normal::new(0.0, 1e-4).expect("fixed sd");
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [init.sample(&mut rng), init.sample(&mut rng)])
        .collect();
    let mut velocity = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];

    let mut kl_history = Vec::with_capacity(cfg.iterations);
    let mut num = vec![0.0f64; n * n]; // Student-t kernel values
    for iter in 0..cfg.iterations {
        // low-dimensional kernel (1 + d^2)^-1 and its normalizer
        let mut num_sum = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let k = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = k;
                num[j * n + i] = k;
                num_sum += 2.0 * k;
            }
        }

        let exaggeration = if iter < cfg.exaggeration_end {
            cfg.early_exaggeration
        } else {
            1.0
        };
        let momentum = if iter < cfg.momentum_switch {
            cfg.initial_momentum
        } else {
            cfg.final_momentum
        };

        for i in 0..n {
            let mut grad = [0.0f64; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = (num[i * n + j] / num_sum).max(P_FLOOR);
                let coeff = 4.0 * (exaggeration * p[i * n + j] - q) * num[i * n + j];
                grad[0] += coeff * (y[i][0] - y[j][0]);
                grad[1] += coeff * (y[i][1] - y[j][1]);
            }
            for d in 0..2 {
                // adaptive per-dimension gains
                if (grad[d] > 0.0) != (velocity[i][d] > 0.0) {
                    gains[i][d] += 0.2;
                } else {
                    gains[i][d] = (gains[i][d] * 0.8).max(0.01);
                }
                velocity[i][d] =
                    momentum * velocity[i][d] - cfg.learning_rate * gains[i][d] * grad[d];
            }
        }
        for (yi, vi) in y.iter_mut().zip(&velocity) {
            yi[0] += vi[0];
            yi[1] += vi[1];
        }
        // keep the embedding centered
        let mean = y.iter().fold([0.0f64; 2], |acc, p| {
            [acc[0] + p[0] / n as f64, acc[1] + p[1] / n as f64]
        });
        for yi in &mut y {
            yi[0] -= mean[0];
            yi[1] -= mean[1];
        }

        // KL(P || Q) with the true (unexaggerated) affinities
        let mut kl = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let pij = p[i * n + j].max(P_FLOOR);
                let qij = (num[i * n + j] / num_sum).max(P_FLOOR);
                kl += pij * (pij / qij).ln();
            }
        }
        kl_history.push(kl);
    }

    Ok(TsneOutput {
        points: y,
        kl_history,
    })
}

fn squared_distances(data: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut d2 = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let acc: f64 = data[i]
                .iter()
                .zip(&data[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d2[i * n + j] = acc;
            d2[j * n + i] = acc;
        }
    }
    d2
}

/// Conditional affinities with per-point bandwidth found by binary search
/// so each row's entropy matches `ln(perplexity)`, then symmetrized to
/// the joint distribution.
fn joint_affinities(d2: &[f64], n: usize, perplexity: f64) -> Vec<f64> {
    let target_entropy = perplexity.ln();
    let mut p_cond = vec![0.0f64; n * n];
    let mut row = vec![0.0f64; n];

    for i in 0..n {
        let mut beta = 1.0f64;
        let mut beta_min = f64::NEG_INFINITY;
        let mut beta_max = f64::INFINITY;

        for _ in 0..BETA_SEARCH_STEPS {
            let mut sum_p = 0.0;
            let mut sum_dp = 0.0;
            for j in 0..n {
                let v = if i == j {
                    0.0
                } else {
                    (-beta * d2[i * n + j]).exp()
                };
                row[j] = v;
                sum_p += v;
                sum_dp += d2[i * n + j] * v;
            }
            // entropy of the row in nats
            let entropy = if sum_p > 0.0 {
                sum_p.ln() + beta * sum_dp / sum_p
            } else {
                0.0
            };
            let diff = entropy - target_entropy;
            if diff.abs() < ENTROPY_TOL {
                break;
            }
            if diff > 0.0 {
                beta_min = beta;
                beta = if beta_max.is_infinite() {
                    beta * 2.0
                } else {
                    (beta + beta_max) / 2.0
                };
            } else {
                beta_max = beta;
                beta = if beta_min.is_infinite() {
                    beta / 2.0
                } else {
                    (beta + beta_min) / 2.0
                };
            }
        }

        let sum_p: f64 = row.iter().sum();
        if sum_p > 0.0 {
            for j in 0..n {
                p_cond[i * n + j] = row[j] / sum_p;
            }
        }
    }

    let mut p = vec![0.0f64; n * n];
    let norm = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (p_cond[i * n + j] + p_cond[j * n + i]) / norm;
        }
    }
    p
}
