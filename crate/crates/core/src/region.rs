// SPDX-License-Identifier: Apache-2.0

//! Multiresolution residual statistics and membership in the approximation
//! regions.
//!
//! For a candidate function `g` on the design points of a sample and an
//! interval `I` of the scheme, the statistic is
//! `w(g, y, I) = sum_{i in I} (y_i - g(t_i)) / sqrt(|I|)`. A function belongs
//! to the region when `|w|` stays below the interval's bound for every `I`:
//!
//! * `Tau(tau)`: `sigma * sqrt(tau * log n)` for every interval;
//! * `Gamma(gamma)`: `sigma * sqrt(2 log(n/|I|) + gamma * log(log(e^e n/|I|)))`,
//!   clamped to zero when the radicand is negative.
//!
//! Comparisons are non-strict and logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::intervals::{loglog_factor, IndexInterval, IntervalScheme, IntervalTable};

/// Threshold family of a region together with its calibrated constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Threshold {
    Tau(f64),
    Gamma(f64),
}

impl Threshold {
    pub fn value(&self) -> f64 {
        match *self {
            Threshold::Tau(v) | Threshold::Gamma(v) => v,
        }
    }

    pub fn same_kind(&self, other: &Threshold) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub scheme: IntervalScheme,
    pub sigma: f64,
    pub threshold: Threshold,
}

impl RegionSpec {
    pub fn new(scheme: IntervalScheme, sigma: f64, threshold: Threshold) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::ScaleNotPositive(sigma));
        }
        match threshold {
            Threshold::Tau(t) if !(t > 0.0) || !t.is_finite() => {
                return Err(Error::InvalidParameter(format!("tau must be positive, got {t}")))
            }
            Threshold::Gamma(g) if !g.is_finite() => {
                return Err(Error::InvalidParameter(format!("gamma must be finite, got {g}")))
            }
            _ => {}
        }
        Ok(RegionSpec {
            scheme,
            sigma,
            threshold,
        })
    }
}

/// `sigma * sqrt(tau * log n)`.
pub fn tau_bound(sigma: f64, tau: f64, n: usize) -> f64 {
    sigma * (tau * (n as f64).ln()).max(0.0).sqrt()
}

/// `sigma * sqrt(2 log(n/m) + gamma * log(log(e^e n/m)))`, zero for a
/// negative radicand.
pub fn star_bound(sigma: f64, gamma: f64, n: usize, m: usize) -> f64 {
    let radicand = 2.0 * (n as f64 / m as f64).ln() + gamma * loglog_factor(n, m);
    sigma * radicand.max(0.0).sqrt()
}

/// Prefix sums with a leading zero. Uses Neumaier compensation for inputs
/// longer than 10^5.
pub fn cumulative_sums(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len() + 1);
    out.push(0.0);
    if values.len() > 100_000 {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for &v in values {
            let t = sum + v;
            if sum.abs() >= v.abs() {
                comp += (sum - t) + v;
            } else {
                comp += (v - t) + sum;
            }
            sum = t;
            out.push(sum + comp);
        }
    } else {
        let mut sum = 0.0;
        for &v in values {
            sum += v;
            out.push(sum);
        }
    }
    out
}

/// Signed `sum_{i in I} r_i / sqrt(|I|)` with `I` 1-based inclusive.
pub fn w_statistic(residuals: &[f64], interval: IndexInterval) -> Result<f64> {
    if interval.lo == 0 || interval.hi > residuals.len() || interval.lo > interval.hi {
        return Err(Error::IndexOutOfRange {
            lo: interval.lo,
            hi: interval.hi,
            len: residuals.len(),
        });
    }
    let sum: f64 = residuals[interval.lo - 1..interval.hi].iter().sum();
    Ok(sum / (interval.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub interval: IndexInterval,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub is_member: bool,
    /// Failing intervals ordered by `(lo, hi)`.
    pub violations: Vec<Violation>,
    /// Largest `|w| / bound`; zero when every statistic is zero.
    pub max_ratio: f64,
}

/// A region specialised to one grid size: the interval table plus the bound
/// of every interval.
#[derive(Debug, Clone)]
pub struct PreparedRegion {
    table: IntervalTable,
    bounds: Vec<f64>,
}

impl PreparedRegion {
    pub fn new(n: usize, spec: &RegionSpec) -> Self {
        let table = IntervalTable::new(n, &spec.scheme);
        let bounds = table
            .intervals()
            .iter()
            .map(|iv| match spec.threshold {
                Threshold::Tau(tau) => tau_bound(spec.sigma, tau, n),
                Threshold::Gamma(gamma) => star_bound(spec.sigma, gamma, n, iv.len()),
            })
            .collect();
        PreparedRegion { table, bounds }
    }

    pub fn n(&self) -> usize {
        self.table.n()
    }

    pub fn intervals(&self) -> &[IndexInterval] {
        self.table.intervals()
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    fn prefix(&self, residuals: &[f64]) -> Result<Vec<f64>> {
        if residuals.len() != self.table.n() {
            return Err(Error::LengthMismatch {
                expected: self.table.n(),
                got: residuals.len(),
            });
        }
        Ok(cumulative_sums(residuals))
    }

    /// Intervals whose statistic exceeds its bound, in scheme order.
    pub fn violating(&self, residuals: &[f64]) -> Result<Vec<IndexInterval>> {
        let prefix = self.prefix(residuals)?;
        Ok((0..self.table.len())
            .filter(|&i| self.table.abs_w(&prefix, i) > self.bounds[i])
            .map(|i| self.table.intervals()[i])
            .collect())
    }

    pub fn check(&self, residuals: &[f64]) -> Result<MembershipReport> {
        let prefix = self.prefix(residuals)?;
        let mut violations = Vec::new();
        let mut max_ratio = 0.0f64;
        for i in 0..self.table.len() {
            let value = self.table.abs_w(&prefix, i);
            let bound = self.bounds[i];
            if value > bound {
                violations.push(Violation {
                    interval: self.table.intervals()[i],
                    value,
                    threshold: bound,
                });
            }
            let ratio = if value == 0.0 {
                0.0
            } else if bound == 0.0 {
                f64::INFINITY
            } else {
                value / bound
            };
            max_ratio = max_ratio.max(ratio);
        }
        violations.sort_by_key(|v| v.interval);
        Ok(MembershipReport {
            is_member: violations.is_empty(),
            violations,
            max_ratio,
        })
    }
}

fn residuals(g: &[f64], sample: &Sample) -> Result<Vec<f64>> {
    if g.len() != sample.len() {
        return Err(Error::LengthMismatch {
            expected: sample.len(),
            got: g.len(),
        });
    }
    Ok(sample.y().iter().zip(g).map(|(y, g)| y - g).collect())
}

/// Membership of `g` (values on the sample's design points) in the region
/// with a `Tau` threshold.
pub fn region_contains(g: &[f64], sample: &Sample, spec: &RegionSpec) -> Result<MembershipReport> {
    if !matches!(spec.threshold, Threshold::Tau(_)) {
        return Err(Error::InvalidParameter(
            "region_contains needs a tau threshold".into(),
        ));
    }
    membership(g, sample, spec)
}

/// Membership in the region with a `Gamma` threshold.
pub fn region_contains_star(
    g: &[f64],
    sample: &Sample,
    spec: &RegionSpec,
) -> Result<MembershipReport> {
    if !matches!(spec.threshold, Threshold::Gamma(_)) {
        return Err(Error::InvalidParameter(
            "region_contains_star needs a gamma threshold".into(),
        ));
    }
    membership(g, sample, spec)
}

/// Membership under whichever threshold kind `spec` carries.
pub fn membership(g: &[f64], sample: &Sample, spec: &RegionSpec) -> Result<MembershipReport> {
    let r = residuals(g, sample)?;
    PreparedRegion::new(sample.len(), spec).check(&r)
}
