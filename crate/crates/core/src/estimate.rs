//! Monte Carlo estimates with standard errors, and per-sample RNG streams.
//!
//! Every sample draws from its own ChaCha stream keyed by `(seed, index)`, and
//! sample values are collected in index order before a pairwise reduction.
//! Estimates are therefore bit-identical regardless of thread count or how
//! rayon splits the work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Independent randomness sources within one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Substream {
    JumpTimes = 0,
    JumpOutcomes = 1,
    Diffusion = 2,
    Randomization = 3,
}

const SUBSTREAMS: u64 = 4;

/// RNG for `substream` of sample `index` under `seed`.
pub fn stream_rng(seed: u64, index: u64, substream: Substream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_mul(SUBSTREAMS) + substream as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    /// Standard error of the mean; NaN with fewer than two samples.
    pub stderr: f64,
    pub n: u64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                estimate: f64::NAN,
                stderr: f64::NAN,
                n: 0,
            };
        }
        let mean = pairwise_sum(samples) / n as f64;
        let stderr = if n < 2 {
            f64::NAN
        } else {
            let sq: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
            (pairwise_sum(&sq) / ((n - 1) as f64) / n as f64).sqrt()
        };
        Self {
            estimate: mean,
            stderr,
            n: n as u64,
        }
    }

    /// `|estimate - target| <= k * stderr`.
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        (self.estimate - target).abs() <= k * self.stderr
    }
}

/// Evaluates `sample(i)` for `i in 0..n` in parallel, in index order.
pub fn parallel_samples<T, F>(n: u64, sample: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(sample).collect()
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
