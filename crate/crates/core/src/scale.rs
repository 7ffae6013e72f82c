// SPDX-License-Identifier: Apache-2.0

//! Noise scale from absolute successive differences.

use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{Error, Result};

/// Normal-consistency factor of the median absolute deviation.
pub const MAD_CONSTANT: f64 = 1.4826;

/// Smallest sample size the honest (upper order statistic) estimator
/// accepts.
pub const HONEST_MIN_POINTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaleMethod {
    MedianDiff,
    HonestOrderStat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleEstimate {
    pub value: f64,
    pub method: ScaleMethod,
    pub n: usize,
    /// Set when the honest order-statistic index had to be clamped to the
    /// number of differences.
    pub clamped: bool,
}

fn abs_diffs_into(y: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(y.windows(2).map(|w| (w[1] - w[0]).abs()));
}

/// Median with midpoint interpolation for even counts. Reorders `values`.
pub fn median_in_place(values: &mut [f64]) -> f64 {
    let len = values.len();
    assert!(len > 0, "median of empty slice");
    let mid = len / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if len % 2 == 1 {
        upper
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (below + upper)
    }
}

/// `(1.4826 / sqrt 2) * median |y_{i+1} - y_i|` on ordered responses, reusing
/// `scratch` for the differences.
pub fn sigma_median_with(y: &[f64], scratch: &mut Vec<f64>) -> f64 {
    abs_diffs_into(y, scratch);
    MAD_CONSTANT / std::f64::consts::SQRT_2 * median_in_place(scratch)
}

pub fn sigma_median_values(y: &[f64]) -> Result<ScaleEstimate> {
    if y.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: y.len(),
        });
    }
    let mut scratch = Vec::with_capacity(y.len());
    Ok(ScaleEstimate {
        value: sigma_median_with(y, &mut scratch),
        method: ScaleMethod::MedianDiff,
        n: y.len(),
        clamped: false,
    })
}

pub fn sigma_median(sample: &Sample) -> Result<ScaleEstimate> {
    sigma_median_values(sample.y())
}

/// 1-based order-statistic index `ceil(n/2 + 1.814 sqrt n)` used by the
/// honest estimator.
pub fn honest_index(n: usize) -> usize {
    let n = n as f64;
    (n / 2.0 + 1.814 * n.sqrt()).ceil() as usize
}

/// Upper order statistic of the scaled successive differences, which
/// exceeds the true scale with probability at least 0.99 for `n >= 100`.
pub fn sigma_honest_values(y: &[f64]) -> Result<ScaleEstimate> {
    let n = y.len();
    if n < HONEST_MIN_POINTS {
        return Err(Error::TooFewPoints {
            needed: HONEST_MIN_POINTS,
            got: n,
        });
    }
    let mut diffs = Vec::with_capacity(n);
    abs_diffs_into(y, &mut diffs);
    let mut k = honest_index(n);
    let clamped = k > diffs.len();
    if clamped {
        k = diffs.len();
    }
    let (_, kth, _) = diffs.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(ScaleEstimate {
        value: MAD_CONSTANT / std::f64::consts::SQRT_2 * *kth,
        method: ScaleMethod::HonestOrderStat,
        n,
        clamped,
    })
}

pub fn sigma_honest(sample: &Sample) -> Result<ScaleEstimate> {
    sigma_honest_values(sample.y())
}
