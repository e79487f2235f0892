//! Time-series statistics for correlated Markov-chain samples.

use serde::{Deserialize, Serialize};

/// A mean with its standard error. `tau_int` is the integrated
/// autocorrelation time the error was inflated by (½ for independent data).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub tau_int: f64,
    pub samples: usize,
}

impl Estimate {
    /// Whether `value` lies within `k` standard errors.
    pub fn within(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr
    }
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

/// Integrated autocorrelation time `½ + Σ_{t≥1} ρ(t)` with Sokal's
/// automatic window: the smallest `M` with `M ≥ c·τ(M)`, `c = 6`.
pub fn integrated_autocorrelation(x: &[f64]) -> f64 {
    const WINDOW_FACTOR: f64 = 6.0;
    let n = x.len();
    if n < 4 {
        return 0.5;
    }
    let m = mean(x);
    let d: Vec<f64> = x.iter().map(|v| v - m).collect();
    let c0 = d.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if c0 == 0.0 || !c0.is_finite() {
        return 0.5;
    }
    let max_lag = n / 2;
    let mut tau = 0.5;
    for t in 1..max_lag {
        let ct = d[..n - t]
            .iter()
            .zip(&d[t..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64;
        tau += ct / c0;
        if t as f64 >= WINDOW_FACTOR * tau {
            break;
        }
    }
    tau.max(0.5)
}

/// Mean and autocorrelation-corrected standard error of a chain.
pub fn estimate(x: &[f64]) -> Estimate {
    let n = x.len();
    let tau = integrated_autocorrelation(x);
    let stderr = if n > 1 {
        (2.0 * tau * variance(x) / n as f64).sqrt()
    } else {
        0.0
    };
    Estimate {
        mean: mean(x),
        stderr,
        tau_int: tau,
        samples: n,
    }
}

/// Prefix sums for O(1) window means.
#[derive(Clone, Debug, Default)]
pub struct PrefixSums {
    sums: Vec<f64>,
}

impl PrefixSums {
    pub fn new(x: &[f64]) -> Self {
        let mut sums = Vec::with_capacity(x.len() + 1);
        sums.push(0.0);
        let mut acc = 0.0;
        for v in x {
            acc += v;
            sums.push(acc);
        }
        Self { sums }
    }

    pub fn len(&self) -> usize {
        self.sums.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mean of `x[lo..hi]`.
    pub fn mean(&self, lo: usize, hi: usize) -> f64 {
        (self.sums[hi] - self.sums[lo]) / (hi - lo) as f64
    }
}
