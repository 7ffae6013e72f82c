// SPDX-License-Identifier: Apache-2.0

//! Equivalence tests for two samples on a common design, and closed-form
//! detection bounds.
//!
//! All four statistics depend on the data only through the difference
//! series `D_i = Y_1(t_i) - Y_2(t_i)` and per-sample scale estimates:
//!
//! * Delgado: `max_j |sum_{i<=j} D_i| / (sigma_D sqrt n)`, `sigma_D` the
//!   successive-difference scale of `D`;
//! * Fan-Lin: `max_m |m^{-1/2} sum_{i<=m} (d_i^2 / s^2 - 1)|` where `d` is the
//!   orthonormal trigonometric transform of `Y_2 - Y_1` ordered mean first,
//!   then cosine/sine pairs by frequency, and `s^2 = sigma_1^2 + sigma_2^2`;
//! * multiresolution (tau / gamma): interval sums of `D` normalised by
//!   `sigma_1 + sigma_2`, the triangle-inequality scale under which no common
//!   function can sit inside both samples' regions.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::calibration::{self, CalibrationRequest, Target};
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::intervals::{loglog_factor, IndexInterval, IntervalScheme, IntervalTable};
use crate::par::Execution;
use crate::region::{cumulative_sums, Threshold};
use crate::scale::sigma_median_with;

/// 0.95 quantile of `max_{0<=t<=1} |B(t)|`, the classical large-sample
/// critical value of the Delgado test.
pub const DELGADO_ASYMPTOTIC_095: f64 = 2.24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Delgado,
    FanLin,
    An,
    AnStar,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Delgado, Method::FanLin, Method::An, Method::AnStar];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Delgado => "delgado",
            Method::FanLin => "fanlin",
            Method::An => "an",
            Method::AnStar => "anstar",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delgado" => Ok(Method::Delgado),
            "fanlin" => Ok(Method::FanLin),
            "an" => Ok(Method::An),
            "anstar" => Ok(Method::AnStar),
            _ => Err(Error::InvalidParameter(format!("unknown method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub method: Method,
    pub statistic: f64,
    pub critical_value: f64,
    pub reject: bool,
    pub alpha: f64,
    /// Interval with the largest statistic-to-bound ratio (multiresolution
    /// tests only).
    pub worst_interval: Option<IndexInterval>,
}

/// Orthonormal real trigonometric transform of length `n`.
#[derive(Clone)]
pub struct TrigPlan {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TrigPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrigPlan").field("n", &self.n).finish()
    }
}

#[derive(Debug, Default, Clone)]
pub struct TrigBuffers {
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl TrigPlan {
    pub fn new(n: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(n.max(1));
        TrigPlan { n, fft }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Coefficients `[c_0, a_1, b_1, a_2, b_2, ...]` with
    /// `c_0 = sum x / sqrt n`, `a_k = sqrt(2/n) sum x_j cos(2 pi k j / n)`,
    /// `b_k = sqrt(2/n) sum x_j sin(2 pi k j / n)` and, for even `n`, the
    /// alternating-sign term last.
    pub fn transform_into(&self, x: &[f64], bufs: &mut TrigBuffers, out: &mut Vec<f64>) {
        let n = self.n;
        assert_eq!(x.len(), n, "transform length");
        bufs.buf.clear();
        bufs.buf.extend(x.iter().map(|&v| Complex::new(v, 0.0)));
        let need = self.fft.get_inplace_scratch_len();
        if bufs.scratch.len() < need {
            bufs.scratch.resize(need, Complex::new(0.0, 0.0));
        }
        self.fft
            .process_with_scratch(&mut bufs.buf, &mut bufs.scratch[..need]);
        let nf = n as f64;
        let c0 = 1.0 / nf.sqrt();
        let ck = (2.0 / nf).sqrt();
        out.clear();
        out.push(bufs.buf[0].re * c0);
        for k in 1..=(n - 1) / 2 {
            out.push(bufs.buf[k].re * ck);
            out.push(-bufs.buf[k].im * ck);
        }
        if n.is_multiple_of(2) && n > 0 {
            out.push(bufs.buf[n / 2].re * c0);
        }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n);
        self.transform_into(x, &mut TrigBuffers::default(), &mut out);
        out
    }
}

/// `max_j |prefix_j| / (sigma sqrt n)` given the prefix sums of the
/// difference series; zero for an all-zero series.
pub fn delgado_from_prefix(prefix: &[f64], sigma: f64) -> f64 {
    let n = prefix.len() - 1;
    let peak = prefix[1..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return 0.0;
    }
    peak / (sigma * (n as f64).sqrt())
}

/// `max_m |m^{-1/2} sum_{i<=m} (d_i^2 / s2 - 1)|`. A zero coefficient over a
/// zero variance counts as zero.
pub fn fanlin_from_coefficients(d: &[f64], s2: f64) -> f64 {
    let mut sum = 0.0;
    let mut best = 0.0f64;
    for (m, &c) in d.iter().enumerate() {
        let sq = c * c;
        let ratio = if sq == 0.0 { 0.0 } else { sq / s2 };
        sum += ratio - 1.0;
        best = best.max(sum.abs() / ((m + 1) as f64).sqrt());
    }
    best
}

/// The four statistics evaluated on one pair of series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleStatistics {
    pub delgado: f64,
    pub fanlin: f64,
    /// Realised `tau`: `max_I S_I^2 / log n`.
    pub an_tau: f64,
    /// Realised `gamma`: `max_I (S_I^2 - 2 log(n/|I|)) / log(log(e^e n/|I|))`.
    pub an_gamma: f64,
}

impl TwoSampleStatistics {
    pub fn get(&self, method: Method) -> f64 {
        match method {
            Method::Delgado => self.delgado,
            Method::FanLin => self.fanlin,
            Method::An => self.an_tau,
            Method::AnStar => self.an_gamma,
        }
    }
}

/// Reusable buffers for [`TwoSampleKernel`].
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    diff: Vec<f64>,
    prefix: Vec<f64>,
    scratch: Vec<f64>,
    coeffs: Vec<f64>,
    trig: TrigBuffers,
}

/// Everything that depends only on `n` and the scheme, shared across
/// replications.
#[derive(Debug, Clone)]
pub struct TwoSampleKernel {
    n: usize,
    table: IntervalTable,
    plan: TrigPlan,
}

impl TwoSampleKernel {
    pub fn new(n: usize, scheme: &IntervalScheme) -> Self {
        TwoSampleKernel {
            n,
            table: IntervalTable::new(n, scheme),
            plan: TrigPlan::new(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> &IntervalTable {
        &self.table
    }

    fn load_diff(&self, y1: &[f64], y2: &[f64], ws: &mut Workspace) {
        assert!(y1.len() == self.n && y2.len() == self.n, "series length");
        ws.diff.clear();
        ws.diff.extend(y1.iter().zip(y2).map(|(a, b)| a - b));
        ws.prefix = cumulative_sums(&ws.diff);
    }

    pub fn delgado(&self, y1: &[f64], y2: &[f64], ws: &mut Workspace) -> f64 {
        self.load_diff(y1, y2, ws);
        let sigma = sigma_median_with(&ws.diff, &mut ws.scratch);
        delgado_from_prefix(&ws.prefix, sigma)
    }

    pub fn fanlin(&self, y1: &[f64], y2: &[f64], ws: &mut Workspace) -> f64 {
        let s1 = sigma_median_with(y1, &mut ws.scratch);
        let s2 = sigma_median_with(y2, &mut ws.scratch);
        self.load_diff(y1, y2, ws);
        // Y_2 - Y_1 = -D; the sign is irrelevant after squaring.
        self.plan.transform_into(&ws.diff, &mut ws.trig, &mut ws.coeffs);
        fanlin_from_coefficients(&ws.coeffs, s1 * s1 + s2 * s2)
    }

    /// `(realised tau, realised gamma)`.
    pub fn an(&self, y1: &[f64], y2: &[f64], ws: &mut Workspace) -> (f64, f64) {
        let s1 = sigma_median_with(y1, &mut ws.scratch);
        let s2 = sigma_median_with(y2, &mut ws.scratch);
        self.load_diff(y1, y2, ws);
        self.an_from_prefix(&ws.prefix, s1 + s2)
    }

    /// As [`TwoSampleKernel::an`] with a known normalizing scale
    /// `sigma_1 + sigma_2` in place of the estimated one.
    pub fn an_known_scale(&self, y1: &[f64], y2: &[f64], scale: f64, ws: &mut Workspace) -> (f64, f64) {
        self.load_diff(y1, y2, ws);
        self.an_from_prefix(&ws.prefix, scale)
    }

    fn an_from_prefix(&self, prefix: &[f64], scale: f64) -> (f64, f64) {
        let logn = (self.n as f64).ln();
        if scale == 0.0 {
            if prefix.iter().all(|&v| v == 0.0) {
                return (0.0, self.table.max_gamma_statistic(prefix, 1.0));
            }
            return (f64::INFINITY, f64::INFINITY);
        }
        let (w, g) = self.table.max_both(prefix, scale);
        (w * w / logn, g)
    }

    pub fn statistics(&self, y1: &[f64], y2: &[f64], ws: &mut Workspace) -> TwoSampleStatistics {
        let s1 = sigma_median_with(y1, &mut ws.scratch);
        let s2 = sigma_median_with(y2, &mut ws.scratch);
        self.load_diff(y1, y2, ws);
        let sd = sigma_median_with(&ws.diff, &mut ws.scratch);
        let delgado = delgado_from_prefix(&ws.prefix, sd);
        self.plan.transform_into(&ws.diff, &mut ws.trig, &mut ws.coeffs);
        let fanlin = fanlin_from_coefficients(&ws.coeffs, s1 * s1 + s2 * s2);
        let (an_tau, an_gamma) = self.an_from_prefix(&ws.prefix, s1 + s2);
        TwoSampleStatistics {
            delgado,
            fanlin,
            an_tau,
            an_gamma,
        }
    }
}

fn check_supports(s1: &Sample, s2: &Sample) -> Result<()> {
    if !s1.same_support(s2) {
        return Err(Error::SupportMismatch);
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Cumulative-sum test. Without an explicit critical value the classical
/// 2.24 is used at `alpha = 0.95`, otherwise the large-sample quantile is
/// simulated with the default calibration settings.
pub fn delgado_test(
    s1: &Sample,
    s2: &Sample,
    alpha: f64,
    critical: Option<f64>,
) -> Result<TestOutcome> {
    check_supports(s1, s2)?;
    check_alpha(alpha)?;
    let kernel = TwoSampleKernel::new(s1.len(), &IntervalScheme::dyadic().with_singletons(false));
    let statistic = kernel.delgado(s1.y(), s2.y(), &mut Workspace::default());
    let critical_value = match critical {
        Some(c) => c,
        None if alpha == 0.95 => DELGADO_ASYMPTOTIC_095,
        None => {
            let req = CalibrationRequest::new(Target::DelgadoAsymptotic, s1.len(), alpha);
            calibration::calibrate_with(&req, Execution::Auto)?.threshold
        }
    };
    Ok(TestOutcome {
        method: Method::Delgado,
        statistic,
        critical_value,
        reject: statistic >= critical_value,
        alpha,
        worst_interval: None,
    })
}

/// Fourier test; the critical value defaults to a finite-sample simulation
/// at the data's size.
pub fn fanlin_test(
    s1: &Sample,
    s2: &Sample,
    alpha: f64,
    critical: Option<f64>,
) -> Result<TestOutcome> {
    check_supports(s1, s2)?;
    check_alpha(alpha)?;
    let n = s1.len();
    let kernel = TwoSampleKernel::new(n, &IntervalScheme::dyadic().with_singletons(false));
    let statistic = kernel.fanlin(s1.y(), s2.y(), &mut Workspace::default());
    let critical_value = match critical {
        Some(c) => c,
        None => {
            let req = CalibrationRequest::new(Target::FanLinFinite, n, alpha);
            calibration::calibrate_with(&req, Execution::Auto)?.threshold
        }
    };
    Ok(TestOutcome {
        method: Method::FanLin,
        statistic,
        critical_value,
        reject: statistic > critical_value,
        alpha,
        worst_interval: None,
    })
}

/// Multiresolution test: rejects when some interval sum of the differences
/// exceeds `(sigma_1 + sigma_2)` times the region bound, i.e. when no common
/// function can lie in both regions.
pub fn an_two_sample_test(
    s1: &Sample,
    s2: &Sample,
    threshold: Threshold,
    scheme: &IntervalScheme,
    alpha: f64,
) -> Result<TestOutcome> {
    check_supports(s1, s2)?;
    let n = s1.len();
    let table = IntervalTable::new(n, scheme);
    let mut scratch = Vec::new();
    let scale = sigma_median_with(s1.y(), &mut scratch) + sigma_median_with(s2.y(), &mut scratch);
    let diff: Vec<f64> = s1.y().iter().zip(s2.y()).map(|(a, b)| a - b).collect();
    let prefix = cumulative_sums(&diff);
    let logn = (n as f64).ln();

    let mut reject = false;
    let mut worst: Option<(f64, IndexInterval)> = None;
    let mut statistic = f64::NEG_INFINITY;
    for (i, iv) in table.intervals().iter().enumerate() {
        let raw = table.abs_w(&prefix, i);
        let s = if raw == 0.0 { 0.0 } else { raw / scale };
        let (bound, stat) = match threshold {
            Threshold::Tau(tau) => ((tau * logn).sqrt(), s * s / logn),
            Threshold::Gamma(gamma) => {
                let pen = table.log_penalty(i);
                let ll = loglog_factor(n, iv.len());
                ((pen + gamma * ll).max(0.0).sqrt(), (s * s - pen) / ll)
            }
        };
        statistic = statistic.max(stat);
        if s > bound {
            reject = true;
        }
        let ratio = if s == 0.0 {
            0.0
        } else if bound == 0.0 {
            f64::INFINITY
        } else {
            s / bound
        };
        if worst.is_none_or(|(r, _)| ratio > r) {
            worst = Some((ratio, *iv));
        }
    }
    let method = match threshold {
        Threshold::Tau(_) => Method::An,
        Threshold::Gamma(_) => Method::AnStar,
    };
    Ok(TestOutcome {
        method,
        statistic,
        critical_value: threshold.value(),
        reject,
        alpha,
        worst_interval: worst.map(|(_, iv)| iv),
    })
}

/// Which closed-form bound [`detection_bound`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// All intervals, tau threshold.
    TauAll,
    /// Multiscale scheme with factor `lambda`, tau threshold.
    TauMultiScale,
    /// Gamma threshold.
    Star,
    /// Cumulative-sum test.
    Delgado,
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tau-all" => Ok(BoundKind::TauAll),
            "tau-multi" => Ok(BoundKind::TauMultiScale),
            "star" => Ok(BoundKind::Star),
            "delgado" => Ok(BoundKind::Delgado),
            _ => Err(Error::InvalidParameter(format!("unknown bound kind '{s}'"))),
        }
    }
}

/// A deviation of height `eta` over a fraction `delta` of the design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationScenario {
    pub eta: f64,
    pub delta: f64,
    pub n: usize,
    pub sigma1: f64,
    pub sigma2: f64,
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
}

impl DeviationScenario {
    pub fn is_detectable(&self, kind: BoundKind) -> Result<bool> {
        Ok(self.eta > detection_bound(self, kind)?)
    }
}

fn required(v: Option<f64>, name: &str) -> Result<f64> {
    v.ok_or_else(|| Error::InvalidParameter(format!("{name} is required for this bound")))
}

/// `h(d) = d / (2 log(1/d) + gamma log(log(e^e/d)))`.
pub fn star_h(d: f64, gamma: f64) -> f64 {
    let denom = 2.0 * (1.0 / d).ln() + gamma * (std::f64::consts::E + (1.0 / d).ln()).ln();
    d / denom
}

/// Smallest deviation height that the given procedure is guaranteed to
/// pick up:
///
/// * `TauAll`: `2 (s1 + s2) sqrt(tau log n / n) / sqrt(delta)`
/// * `TauMultiScale`: the above times `sqrt(lambda)`
/// * `Star`: `2 (s1 + s2) / (sqrt(n) h(sqrt(delta)))`, `h` evaluated at
///   `sqrt(delta)` exactly as the bound is usually stated
/// * `Delgado`: `4.48 sqrt(s1^2 + s2^2) / (delta sqrt n)`
pub fn detection_bound(scenario: &DeviationScenario, kind: BoundKind) -> Result<f64> {
    let DeviationScenario {
        delta,
        n,
        sigma1,
        sigma2,
        ..
    } = *scenario;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    if !(sigma1 >= 0.0 && sigma2 >= 0.0) {
        return Err(Error::InvalidParameter("scales must be non-negative".into()));
    }
    let nf = n as f64;
    match kind {
        BoundKind::TauAll | BoundKind::TauMultiScale => {
            let tau = required(scenario.tau, "tau")?;
            let base = 2.0 * (sigma1 + sigma2) * (tau * nf.ln() / nf).sqrt() / delta.sqrt();
            if kind == BoundKind::TauAll {
                Ok(base)
            } else {
                let lambda = required(scenario.lambda, "lambda")?;
                if !(lambda > 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "lambda must exceed 1, got {lambda}"
                    )));
                }
                Ok(base * lambda.sqrt())
            }
        }
        BoundKind::Star => {
            let gamma = required(scenario.gamma, "gamma")?;
            let h = star_h(delta.sqrt(), gamma);
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "h(sqrt(delta)) is not positive for delta = {delta}, gamma = {gamma}"
                )));
            }
            Ok(2.0 * (sigma1 + sigma2) / (nf.sqrt() * h))
        }
        BoundKind::Delgado => {
            let sigma = (sigma1 * sigma1 + sigma2 * sigma2).sqrt();
            Ok(4.48 * sigma / (delta * nf.sqrt()))
        }
    }
}
