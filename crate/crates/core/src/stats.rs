//! Streaming moment accumulators, histograms and batch summaries.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

/// Running mean and co-moment matrix of `N`-dimensional samples.
///
/// Accumulators from independent shards combine with [`Covariance::merge`]
/// using the pairwise (count, mean, M2) rule, so sharded and sequential
/// accumulation agree up to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance<const N: usize> {
    count: u64,
    mean: SVector<f64, N>,
    comoment: SMatrix<f64, N, N>,
}

impl<const N: usize> Default for Covariance<N> {
    fn default() -> Self {
        Self {
            count: 0,
            mean: SVector::zeros(),
            comoment: SMatrix::zeros(),
        }
    }
}

impl<const N: usize> Covariance<N> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, sample: &SVector<f64, N>) {
        self.count += 1;
        let delta = sample - self.mean;
        self.mean += delta / self.count as f64;
        let delta2 = sample - self.mean;
        self.comoment += delta * delta2.transpose();
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let n_a = self.count as f64;
        let n_b = other.count as f64;
        let n = n_a + n_b;
        let delta = other.mean - self.mean;
        self.mean += delta * (n_b / n);
        self.comoment += other.comoment + delta * delta.transpose() * (n_a * n_b / n);
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> SVector<f64, N> {
        self.mean
    }

    /// Unbiased sample covariance (divides by n − 1).
    pub fn covariance(&self) -> SMatrix<f64, N, N> {
        if self.count < 2 {
            return SMatrix::zeros();
        }
        self.comoment / (self.count - 1) as f64
    }
}

/// Fixed-width histogram over `[lo, hi)`. Samples outside are counted
/// separately and excluded from the masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bin_width: f64) -> Self {
        let bins = ((hi - lo) / bin_width).round().max(1.0) as usize;
        Self {
            lo,
            bin_width,
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
        }
    }

    pub fn push(&mut self, value: f64) {
        let pos = (value - self.lo) / self.bin_width;
        if pos < 0.0 {
            self.underflow += 1;
        } else if pos as usize >= self.counts.len() {
            self.overflow += 1;
        } else {
            self.counts[pos as usize] += 1;
        }
    }

    pub fn in_range(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.in_range() + self.underflow + self.overflow
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.counts.len()).map(|i| self.lo + (i as f64 + 0.5) * self.bin_width)
    }

    /// Probability mass per bin; sums to one when any sample is in range.
    pub fn masses(&self) -> Vec<f64> {
        let total = self.in_range() as f64;
        self.counts
            .iter()
            .map(|&c| if total > 0.0 { c as f64 / total } else { 0.0 })
            .collect()
    }

    pub fn mean(&self) -> f64 {
        self.centers().zip(self.masses()).map(|(c, m)| c * m).sum()
    }

    /// Third standardized moment of the binned distribution.
    pub fn skewness(&self) -> f64 {
        let mean = self.mean();
        let (m2, m3) = self
            .centers()
            .zip(self.masses())
            .fold((0.0, 0.0), |(m2, m3), (c, m)| {
                let d = c - mean;
                (m2 + m * d * d, m3 + m * d * d * d)
            });
        if m2 > 0.0 {
            m3 / m2.powf(1.5)
        } else {
            0.0
        }
    }

    /// Quantile by linear interpolation inside the bin holding it.
    pub fn quantile(&self, q: f64) -> f64 {
        let masses = self.masses();
        let mut acc = 0.0;
        for (i, m) in masses.iter().enumerate() {
            if acc + m >= q && *m > 0.0 {
                let frac = (q - acc) / m;
                return self.lo + (i as f64 + frac) * self.bin_width;
            }
            acc += m;
        }
        self.lo + self.counts.len() as f64 * self.bin_width
    }

    pub fn iqr(&self) -> f64 {
        self.quantile(0.75) - self.quantile(0.25)
    }
}

/// Summary of termination times over a batch of episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub episodes: usize,
    pub mean: f64,
    pub median: f64,
    pub std_error: f64,
    /// Fraction of episodes stopped by the step limit rather than failure.
    pub censored_fraction: f64,
    pub aborted: usize,
}

impl BatchSummary {
    pub fn from_times(times: &[u64], censored: usize, aborted: usize) -> Self {
        let n = times.len();
        if n == 0 {
            return Self {
                episodes: 0,
                mean: f64::NAN,
                median: f64::NAN,
                std_error: f64::NAN,
                censored_fraction: 0.0,
                aborted,
            };
        }
        let mean = times.iter().map(|&t| t as f64).sum::<f64>() / n as f64;
        let mut sorted = times.to_vec();
        sorted.sort_unstable();
        let median = if n % 2 == 1 {
            sorted[n / 2] as f64
        } else {
            0.5 * (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64)
        };
        let std_error = if n > 1 {
            let var = times.iter().map(|&t| (t as f64 - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            episodes: n,
            mean,
            median,
            std_error,
            censored_fraction: censored as f64 / n as f64,
            aborted,
        }
    }
}
