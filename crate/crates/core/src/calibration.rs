// SPDX-License-Identifier: Apache-2.0

//! Monte Carlo calibration of thresholds and critical values.
//!
//! Every target reduces to the same recipe: simulate a raw statistic under
//! pure `N(0, 1)` noise once per replication, take the linearly interpolated
//! empirical `alpha`-quantile, and map it to threshold units with a monotone
//! transform. Replication `r` draws from its own counter-based stream, so the
//! result does not depend on how replications are scheduled.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intervals::{IntervalScheme, IntervalTable};
use crate::par::{map_with_scratch, Execution};
use crate::region::cumulative_sums;
use crate::rng::{stream_rng, StreamRng};
use crate::two_sample::{TwoSampleKernel, Workspace};

pub const DEFAULT_REPLICATIONS: usize = 10_000;
pub const MIN_REPLICATIONS: usize = 100;
pub const DEFAULT_SEED: u64 = 7;
/// Random-walk length approximating `max |B(t)|`.
pub const DEFAULT_WALK_STEPS: usize = 10_000;
/// Number of order statistics reported around the quantile.
pub const CDF_SLICE_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// `tau` of the single-sample region.
    TauSingle,
    /// `gamma` of the single-sample starred region.
    GammaSingle,
    /// Size-`1 - alpha` `tau` of the multiresolution two-sample test.
    TauTwoSample,
    /// Size-`1 - alpha` `gamma` of the multiresolution two-sample test.
    GammaTwoSample,
    /// Quantile of `max |B(t)|` by random walk.
    DelgadoAsymptotic,
    /// Quantile of the cumulative-sum statistic at the requested `n`.
    DelgadoFinite,
    /// Quantile of the Fourier statistic at the requested `n`.
    FanLinFinite,
}

impl Target {
    pub const ALL: [Target; 7] = [
        Target::TauSingle,
        Target::GammaSingle,
        Target::TauTwoSample,
        Target::GammaTwoSample,
        Target::DelgadoAsymptotic,
        Target::DelgadoFinite,
        Target::FanLinFinite,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Target::TauSingle => "tau",
            Target::GammaSingle => "gamma",
            Target::TauTwoSample => "tau2",
            Target::GammaTwoSample => "gamma2",
            Target::DelgadoAsymptotic => "delgado",
            Target::DelgadoFinite => "delgado-finite",
            Target::FanLinFinite => "fanlin",
        }
    }

    /// Whether the statistic is a maximum over an interval scheme.
    pub fn uses_scheme(&self) -> bool {
        matches!(
            self,
            Target::TauSingle | Target::GammaSingle | Target::TauTwoSample | Target::GammaTwoSample
        )
    }

    /// Stream tag. Single-sample targets share one tag, and so do the
    /// two-sample ones, so related thresholds are computed from common noise.
    fn stream_tag(&self) -> u64 {
        match self {
            Target::TauSingle | Target::GammaSingle => 1,
            Target::TauTwoSample
            | Target::GammaTwoSample
            | Target::DelgadoFinite
            | Target::FanLinFinite => 2,
            Target::DelgadoAsymptotic => 3,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Target::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown calibration target '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRequest {
    pub target: Target,
    pub n: usize,
    pub scheme: IntervalScheme,
    pub alpha: f64,
    pub replications: usize,
    pub master_seed: u64,
    pub walk_steps: usize,
}

impl CalibrationRequest {
    pub fn new(target: Target, n: usize, alpha: f64) -> Self {
        CalibrationRequest {
            target,
            n,
            scheme: IntervalScheme::dyadic(),
            alpha,
            replications: DEFAULT_REPLICATIONS,
            master_seed: DEFAULT_SEED,
            walk_steps: DEFAULT_WALK_STEPS,
        }
    }

    pub fn with_scheme(mut self, scheme: IntervalScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_replications(mut self, replications: usize) -> Self {
        self.replications = replications;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_walk_steps(mut self, steps: usize) -> Self {
        self.walk_steps = steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::InvalidParameter(format!(
                "at least {MIN_REPLICATIONS} replications are required, got {}",
                self.replications
            )));
        }
        let size = self.length();
        if size < 2 {
            return Err(Error::TooFewPoints { needed: 2, got: size });
        }
        Ok(())
    }

    /// Effective simulation length: the walk length for the asymptotic
    /// Delgado target, `n` otherwise.
    fn length(&self) -> usize {
        if self.target == Target::DelgadoAsymptotic {
            self.walk_steps
        } else {
            self.n
        }
    }

    fn to_threshold(&self, raw: f64) -> f64 {
        match self.target {
            Target::TauSingle => raw * raw / (self.n as f64).ln(),
            _ => raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub target: Target,
    pub n: usize,
    pub scheme: IntervalScheme,
    pub alpha: f64,
    pub threshold: f64,
    pub standard_error: f64,
    /// Quantile of the simulated statistic before conversion to threshold
    /// units (equal to `threshold` except for [`Target::TauSingle`], where it
    /// is the quantile of `max_I |sum_I Z| / sqrt|I|`).
    pub raw_quantile: f64,
    pub raw_standard_error: f64,
    pub replications: usize,
    pub seed: u64,
    /// Zero-based rank of the first entry of `empirical_cdf_slice`.
    pub cdf_slice_start: usize,
    /// Consecutive order statistics around the quantile, in threshold units.
    pub empirical_cdf_slice: Vec<f64>,
}

/// Linearly interpolated quantile of sorted data: position `(R - 1) p`
/// between zero-based order statistics.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Raw statistic of every replication, in replication order.
pub fn simulate_statistics(req: &CalibrationRequest, exec: Execution) -> Result<Vec<f64>> {
    req.validate()?;
    let len = req.length();
    let tags = [req.target.stream_tag(), len as u64];
    let seed = req.master_seed;
    let noise = move |rng: &mut StreamRng, buf: &mut Vec<f64>| {
        buf.clear();
        buf.extend((0..len).map(|_| rng.sample::<f64, _>(StandardNormal)));
    };

    let out = match req.target {
        Target::TauSingle | Target::GammaSingle => {
            let table = IntervalTable::new(req.n, &req.scheme);
            let gamma = req.target == Target::GammaSingle;
            map_with_scratch(
                req.replications,
                exec,
                Vec::new,
                |z: &mut Vec<f64>, r| {
                    noise(&mut stream_rng(seed, &tags, r as u64), z);
                    let prefix = cumulative_sums(z);
                    if gamma {
                        table.max_gamma_statistic(&prefix, 1.0)
                    } else {
                        table.max_abs_w(&prefix)
                    }
                },
            )
        }
        Target::DelgadoAsymptotic => map_with_scratch(
            req.replications,
            exec,
            Vec::new,
            |z: &mut Vec<f64>, r| {
                noise(&mut stream_rng(seed, &tags, r as u64), z);
                let mut sum = 0.0f64;
                let mut best = 0.0f64;
                for v in z.iter() {
                    sum += v;
                    best = best.max(sum.abs());
                }
                best / (len as f64).sqrt()
            },
        ),
        Target::TauTwoSample | Target::GammaTwoSample | Target::DelgadoFinite | Target::FanLinFinite => {
            let kernel = TwoSampleKernel::new(req.n, &req.scheme);
            let target = req.target;
            map_with_scratch(
                req.replications,
                exec,
                || (Vec::new(), Vec::new(), Workspace::default()),
                |(y1, y2, ws): &mut (Vec<f64>, Vec<f64>, Workspace), r| {
                    let mut rng = stream_rng(seed, &tags, r as u64);
                    noise(&mut rng, y1);
                    noise(&mut rng, y2);
                    match target {
                        Target::TauTwoSample => kernel.an(y1, y2, ws).0,
                        Target::GammaTwoSample => kernel.an(y1, y2, ws).1,
                        Target::DelgadoFinite => kernel.delgado(y1, y2, ws),
                        _ => kernel.fanlin(y1, y2, ws),
                    }
                },
            )
        }
    };
    Ok(out)
}

/// Calibrates with automatic execution mode.
pub fn calibrate(req: &CalibrationRequest) -> Result<CalibrationResult> {
    calibrate_with(req, Execution::Auto)
}

pub fn calibrate_with(req: &CalibrationRequest, exec: Execution) -> Result<CalibrationResult> {
    let mut stats = simulate_statistics(req, exec)?;
    stats.sort_unstable_by(f64::total_cmp);
    Ok(summarize(req, &stats))
}

fn summarize(req: &CalibrationRequest, sorted: &[f64]) -> CalibrationResult {
    let r = sorted.len();
    let alpha = req.alpha;
    let raw_quantile = empirical_quantile(sorted, alpha);

    // One-standard-error band from the binomial count of exceedances.
    let half = ((r as f64) * alpha * (1.0 - alpha)).sqrt();
    let p_lo = (alpha - half / r as f64).max(0.0);
    let p_hi = (alpha + half / r as f64).min(1.0);
    let (q_lo, q_hi) = (empirical_quantile(sorted, p_lo), empirical_quantile(sorted, p_hi));
    let raw_standard_error = ((q_hi - q_lo) / 2.0).max(0.0);
    let standard_error = ((req.to_threshold(q_hi) - req.to_threshold(q_lo)) / 2.0).max(0.0);

    let pos = ((r - 1) as f64 * alpha).floor() as usize;
    let start = (pos + 1).saturating_sub(CDF_SLICE_LEN / 2).min(r.saturating_sub(CDF_SLICE_LEN));
    let end = (start + CDF_SLICE_LEN).min(r);
    let empirical_cdf_slice = sorted[start..end].iter().map(|&v| req.to_threshold(v)).collect();

    CalibrationResult {
        target: req.target,
        n: req.n,
        scheme: req.scheme,
        alpha,
        threshold: req.to_threshold(raw_quantile),
        standard_error,
        raw_quantile,
        raw_standard_error,
        replications: r,
        seed: req.master_seed,
        cdf_slice_start: start,
        empirical_cdf_slice,
    }
}

fn expect_target(req: &CalibrationRequest, allowed: &[Target]) -> Result<()> {
    if allowed.contains(&req.target) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "target {} is not handled here",
            req.target
        )))
    }
}

pub fn calibrate_tau(req: &CalibrationRequest) -> Result<CalibrationResult> {
    expect_target(req, &[Target::TauSingle])?;
    calibrate(req)
}

pub fn calibrate_gamma(req: &CalibrationRequest) -> Result<CalibrationResult> {
    expect_target(req, &[Target::GammaSingle])?;
    calibrate(req)
}

pub fn calibrate_delgado(req: &CalibrationRequest) -> Result<CalibrationResult> {
    expect_target(req, &[Target::DelgadoAsymptotic, Target::DelgadoFinite])?;
    calibrate(req)
}

pub fn calibrate_fanlin(req: &CalibrationRequest) -> Result<CalibrationResult> {
    expect_target(req, &[Target::FanLinFinite])?;
    calibrate(req)
}

pub fn calibrate_two_sample(req: &CalibrationRequest) -> Result<CalibrationResult> {
    expect_target(req, &[Target::TauTwoSample, Target::GammaTwoSample])?;
    calibrate(req)
}
