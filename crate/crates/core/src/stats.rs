//! Distribution summaries for SNR/SINR samples (in dB).

use crate::error::{Error, Result};

/// Percentiles reported in every summary.
pub const PERCENTILES: [f64; 9] = [1.0, 5.0, 10.0, 25.0, 50.0, 75.0, 90.0, 95.0, 99.0];

/// Points on the empirical CDF grid.
pub const CDF_POINTS: usize = 101;

#[derive(Clone, Debug, PartialEq)]
pub struct DistributionStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (n - 1 denominator; zero for one sample).
    pub std: f64,
    /// `(percent, value)` pairs for [`PERCENTILES`].
    pub percentiles: Vec<(f64, f64)>,
    /// `(x, P[X <= x])` on a uniform grid from the minimum to the maximum.
    pub cdf: Vec<(f64, f64)>,
}

/// Linear interpolation between order statistics at rank `p/100 * (n-1)`.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = (p / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = rank - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

pub fn distribution_stats(samples: &[f64]) -> Result<DistributionStats> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples to summarize".into()));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("samples must be finite".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let mean = if lo == hi { lo } else { sorted.iter().sum::<f64>() / n as f64 };
    let std = if n > 1 && lo != hi {
        (sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let percentiles = PERCENTILES
        .iter()
        .map(|&p| (p, percentile_sorted(&sorted, p)))
        .collect();

    let cdf = if lo == hi {
        vec![(lo, 1.0)]
    } else {
        (0..CDF_POINTS)
            .map(|i| {
                let x = if i + 1 == CDF_POINTS {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (CDF_POINTS - 1) as f64
                };
                let below = sorted.partition_point(|&s| s <= x);
                (x, below as f64 / n as f64)
            })
            .collect()
    };

    Ok(DistributionStats {
        count: n,
        mean,
        median: percentile_sorted(&sorted, 50.0),
        std,
        percentiles,
        cdf,
    })
}

impl DistributionStats {
    pub fn percentile(&self, p: f64) -> Option<f64> {
        self.percentiles.iter().find(|(q, _)| *q == p).map(|(_, v)| *v)
    }
}
