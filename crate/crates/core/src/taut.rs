// SPDX-License-Identifier: Apache-2.0

//! Taut strings through tubes around cumulative sums, and the k-sample fit
//! that squeezes the tube until the fit lies in every sample's region.
//!
//! A tube is a sequence of vertical gates `[L_m, U_m]` at abscissae `x_m`.
//! The taut string is the shortest polygonal path from the first gate to
//! the last that passes through every gate. Its knots sit on gate bounds,
//! and its slopes form the piecewise-constant fit. Among all functions whose
//! integrals pass through the gates, that fit has the fewest local extremes.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::data::{merge_samples, MergedGrid, Sample};
use crate::error::{Error, Result};
use crate::region::{MembershipReport, PreparedRegion, RegionSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tube {
    x: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Tube {
    /// Gates `[lower_m, upper_m]` at strictly increasing `x`. The string is
    /// pinned to `start` at the first gate and `end` at the last, and both
    /// must lie within those gates.
    pub fn new(
        x: Vec<f64>,
        mut lower: Vec<f64>,
        mut upper: Vec<f64>,
        start: f64,
        end: f64,
    ) -> Result<Self> {
        let len = x.len();
        if len < 2 {
            return Err(Error::TooFewPoints { needed: 2, got: len });
        }
        for v in [&lower, &upper] {
            if v.len() != len {
                return Err(Error::LengthMismatch {
                    expected: len,
                    got: v.len(),
                });
            }
        }
        let finite = |v: &[f64]| v.iter().all(|a| a.is_finite());
        if !finite(&x) || !finite(&lower) || !finite(&upper) || !start.is_finite() || !end.is_finite() {
            return Err(Error::NonFinite);
        }
        if x.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("tube abscissae must increase strictly".into()));
        }
        let last = len - 1;
        for (m, value) in [(0, start), (last, end)] {
            if !(lower[m] <= value && value <= upper[m]) {
                return Err(Error::InfeasibleTube(m));
            }
            lower[m] = value;
            upper[m] = value;
        }
        if let Some(m) = (0..len).find(|&m| lower[m] > upper[m]) {
            return Err(Error::InfeasibleTube(m));
        }
        Ok(Tube { x, lower, upper })
    }

    /// `center +- half_width`, pinned to the center at both ends.
    pub fn around(x: Vec<f64>, center: &[f64], half_width: &[f64]) -> Result<Self> {
        if center.len() != x.len() || half_width.len() != x.len() {
            return Err(Error::LengthMismatch {
                expected: x.len(),
                got: center.len().min(half_width.len()),
            });
        }
        if half_width.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("tube widths must be non-negative".into()));
        }
        let lower = center.iter().zip(half_width).map(|(c, w)| c - w).collect();
        let upper = center.iter().zip(half_width).map(|(c, w)| c + w).collect();
        let (start, end) = (center[0], center[center.len() - 1]);
        Tube::new(x, lower, upper, start, end)
    }

    /// Number of gates.
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Touch {
    LowerBoundary,
    UpperBoundary,
    Endpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    /// Gate index.
    pub index: usize,
    pub x: f64,
    pub value: f64,
    pub touch: Touch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TautString {
    pub knots: Vec<Knot>,
}

impl TautString {
    /// Slope on each cell `(x_{m-1}, x_m]`, `m = 1..len`. Cells inside one
    /// segment share the bit-identical slope.
    pub fn slopes(&self) -> Vec<f64> {
        let cells = self.knots.last().map_or(0, |k| k.index);
        let mut out = Vec::with_capacity(cells);
        for w in self.knots.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let s = (b.value - a.value) / (b.x - a.x);
            out.extend(std::iter::repeat_n(s, b.index - a.index));
        }
        out
    }

    /// String height at every gate abscissa.
    pub fn values_at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.len());
        for w in self.knots.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            out.push(a.value);
            for &xm in &x[a.index + 1..b.index] {
                out.push(a.value + (xm - a.x) * (b.value - a.value) / (b.x - a.x));
            }
        }
        if let Some(last) = self.knots.last() {
            out.push(last.value);
        }
        out
    }

    /// Euclidean length of the polygon.
    pub fn length(&self) -> f64 {
        self.knots
            .windows(2)
            .map(|w| (w[1].x - w[0].x).hypot(w[1].value - w[0].value))
            .sum()
    }
}

#[derive(Debug, Clone, Copy)]
struct Pt {
    m: usize,
    x: f64,
    v: f64,
}

/// Sign of the turn `a -> b -> c`; positive for a left (counter-clockwise)
/// turn.
#[inline]
fn cross(a: Pt, b: Pt, c: Pt) -> f64 {
    (b.x - a.x) * (c.v - a.v) - (b.v - a.v) * (c.x - a.x)
}

/// Shortest path through the tube by a funnel sweep.
///
/// `upper` holds the shortest path from the apex to the newest upper bound
/// (convex, it bends under earlier upper bounds), `lower` the shortest path
/// to the newest lower bound (concave). When a new bound makes one chain
/// collapse to the apex and cut through the other chain, the apex walks
/// along the other chain and every point it passes becomes a knot.
pub fn taut_string_solve(tube: &Tube) -> TautString {
    let len = tube.len();
    let pt = |m: usize, v: f64| Pt { m, x: tube.x[m], v };
    let start = pt(0, tube.lower[0]);
    let mut knots = vec![Knot {
        index: 0,
        x: start.x,
        value: start.v,
        touch: Touch::Endpoint,
    }];
    let mut upper: VecDeque<Pt> = VecDeque::from([start]);
    let mut lower: VecDeque<Pt> = VecDeque::from([start]);
    let emit = |knots: &mut Vec<Knot>, p: Pt, touch: Touch| {
        knots.push(Knot {
            index: p.m,
            x: p.x,
            value: p.v,
            touch,
        });
    };

    for m in 1..len {
        let p = pt(m, tube.upper[m]);
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop_back();
        }
        if upper.len() == 1 {
            while lower.len() >= 2 && cross(lower[0], lower[1], p) < 0.0 {
                lower.pop_front();
                emit(&mut knots, lower[0], Touch::LowerBoundary);
            }
            upper[0] = lower[0];
        }
        upper.push_back(p);

        let q = pt(m, tube.lower[m]);
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], q) >= 0.0 {
            lower.pop_back();
        }
        if lower.len() == 1 {
            while upper.len() >= 2 && cross(upper[0], upper[1], q) > 0.0 {
                upper.pop_front();
                emit(&mut knots, upper[0], Touch::UpperBoundary);
            }
            lower[0] = upper[0];
        }
        lower.push_back(q);
    }

    // Both chains now end at the pinned endpoint; at most one of them has
    // interior points and that one is the remaining path.
    let (chain, touch) = if upper.len() >= lower.len() {
        (upper, Touch::UpperBoundary)
    } else {
        (lower, Touch::LowerBoundary)
    };
    let last = chain.len() - 1;
    for (i, p) in chain.into_iter().enumerate().skip(1) {
        emit(&mut knots, p, if i == last { Touch::Endpoint } else { touch });
    }
    TautString { knots }
}

/// Number of strict interior local extremes; runs of equal values count as
/// one plateau, which is an extreme when the neighbouring runs lie on the
/// same side of it.
pub fn count_local_extremes(values: &[f64]) -> usize {
    let mut runs: Vec<f64> = Vec::with_capacity(values.len());
    for &v in values {
        if runs.last() != Some(&v) {
            runs.push(v);
        }
    }
    runs.windows(3)
        .filter(|w| (w[1] - w[0]) * (w[2] - w[1]) < 0.0)
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Factor applied to the local half-width at squeezed gates, in `(0, 1)`.
    pub squeeze: f64,
    pub max_rounds: usize,
    /// Keep the half-widths of every round in the history.
    pub record_widths: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            squeeze: 0.5,
            max_rounds: 200,
            record_widths: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Violating intervals per sample.
    pub violations: Vec<usize>,
    pub n_local_extremes: usize,
    /// Gates squeezed after this round.
    pub squeezed: usize,
    pub widths: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TautStringFit {
    /// Merged grid.
    pub t: Vec<f64>,
    /// Fit value at each merged grid point.
    pub values: Vec<f64>,
    pub n_local_extremes: usize,
    /// Number of squeezes applied before the fit was accepted.
    pub squeeze_rounds: usize,
    pub final_tube: Tube,
    pub string: TautString,
    pub history: Vec<RoundRecord>,
    pub memberships: Vec<MembershipReport>,
}

impl TautStringFit {
    /// Fit values at the design points of sample `i`, given the positions
    /// recorded in the merged grid.
    pub fn restrict(&self, positions: &[usize]) -> Vec<f64> {
        positions.iter().map(|&m| self.values[m]).collect()
    }
}

struct SampleCheck {
    region: PreparedRegion,
    residuals: Vec<f64>,
}

impl SampleCheck {
    fn load(&mut self, sample: &Sample, positions: &[usize], g: &[f64]) {
        self.residuals.clear();
        self.residuals
            .extend(sample.y().iter().zip(positions).map(|(y, &m)| y - g[m]));
    }
}

fn validate_specs(samples: &[Sample], specs: &[RegionSpec], config: &FitConfig) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if specs.len() != samples.len() {
        return Err(Error::LengthMismatch {
            expected: samples.len(),
            got: specs.len(),
        });
    }
    if specs.windows(2).any(|w| !w[0].threshold.same_kind(&w[1].threshold)) {
        return Err(Error::InvalidParameter(
            "all samples must use the same threshold kind".into(),
        ));
    }
    if !(config.squeeze > 0.0 && config.squeeze < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "squeeze factor must lie in (0, 1), got {}",
            config.squeeze
        )));
    }
    Ok(())
}

/// Taut-string fit that lies in every sample's region.
///
/// The merged interpolant is checked first; if it is not a joint member no
/// function on the grid can be found by squeezing and the call fails with
/// [`Error::NoJointApproximation`]. Otherwise the tube starts just wide
/// enough to contain the chord and is narrowed by `config.squeeze` at every
/// gate touching a violating interval until all memberships hold.
pub fn joint_taut_fit(
    samples: &[Sample],
    specs: &[RegionSpec],
    config: &FitConfig,
) -> Result<TautStringFit> {
    validate_specs(samples, specs, config)?;
    let sigmas: Vec<f64> = specs.iter().map(|s| s.sigma).collect();
    let merged = merge_samples(samples, &sigmas)?;
    let mut checks: Vec<SampleCheck> = samples
        .iter()
        .zip(specs)
        .map(|(s, spec)| SampleCheck {
            region: PreparedRegion::new(s.len(), spec),
            residuals: Vec::with_capacity(s.len()),
        })
        .collect();

    for (i, check) in checks.iter_mut().enumerate() {
        check.load(&samples[i], &merged.positions[i], &merged.y);
        if !check.region.violating(&check.residuals)?.is_empty() {
            return Err(Error::NoJointApproximation);
        }
    }

    let mut widths = initial_widths(&merged);
    let n = merged.len();
    let mut history = Vec::new();
    let mut marked = vec![false; n + 1];
    for round in 0..=config.max_rounds {
        let tube = Tube::around(merged.cum_w.clone(), &merged.cum_y, &widths)?;
        let string = taut_string_solve(&tube);
        let values = string.slopes();
        let n_local_extremes = count_local_extremes(&values);

        marked.iter_mut().for_each(|b| *b = false);
        let mut violations = Vec::with_capacity(samples.len());
        for (i, check) in checks.iter_mut().enumerate() {
            check.load(&samples[i], &merged.positions[i], &values);
            let bad = check.region.violating(&check.residuals)?;
            for iv in &bad {
                // Grid point g (0-based) closes the cell between gates g and g + 1.
                let lo = merged.positions[i][iv.lo - 1];
                let hi = merged.positions[i][iv.hi - 1] + 1;
                marked[lo..=hi].iter_mut().for_each(|b| *b = true);
            }
            violations.push(bad.len());
        }
        let total: usize = violations.iter().sum();
        let squeezed = if total == 0 {
            0
        } else {
            marked[1..n].iter().filter(|&&b| b).count()
        };
        history.push(RoundRecord {
            round,
            violations,
            n_local_extremes,
            squeezed,
            widths: config.record_widths.then(|| widths.clone()),
        });

        if total == 0 {
            let memberships = checks
                .iter_mut()
                .enumerate()
                .map(|(i, c)| {
                    c.load(&samples[i], &merged.positions[i], &values);
                    c.region.check(&c.residuals)
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(TautStringFit {
                t: merged.t.clone(),
                values,
                n_local_extremes,
                squeeze_rounds: round,
                final_tube: tube,
                string,
                history,
                memberships,
            });
        }
        if round == config.max_rounds {
            return Err(Error::MaxRoundsExceeded {
                rounds: config.max_rounds,
                violations: total,
            });
        }
        for m in 1..n {
            if marked[m] {
                widths[m] *= config.squeeze;
            }
        }
    }
    unreachable!("loop returns on its last round")
}

/// Half-widths making the chord from the first to the last cumulative sum
/// feasible, with a small relative slack; zero at both ends.
fn initial_widths(merged: &MergedGrid) -> Vec<f64> {
    let x = &merged.cum_w;
    let y = &merged.cum_y;
    let n = merged.len();
    let slope = y[n] / x[n];
    let maxdev = (0..=n).fold(0.0f64, |m, i| m.max((y[i] - slope * x[i]).abs()));
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let d = maxdev + 1e-6 * (maxdev + scale);
    let mut w = vec![d; n + 1];
    w[0] = 0.0;
    w[n] = 0.0;
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intervals::IntervalScheme;
    use crate::region::Threshold;

    fn tube(x: &[f64], lower: &[f64], upper: &[f64]) -> Tube {
        let last = x.len() - 1;
        Tube::new(x.to_vec(), lower.to_vec(), upper.to_vec(), lower[0], lower[last]).unwrap()
    }

    #[test]
    fn extremes_examples() {
        assert_eq!(count_local_extremes(&[1.0, 2.0, 2.0, 5.0]), 0);
        assert_eq!(count_local_extremes(&[0.0, 1.0, 0.0]), 1);
        assert_eq!(count_local_extremes(&[0.0, 1.0, 1.0, 0.0, -1.0, -1.0, 0.0]), 2);
        assert_eq!(count_local_extremes(&[]), 0);
        assert_eq!(count_local_extremes(&[3.0, 3.0, 3.0]), 0);
    }

    #[test]
    fn wide_tube_gives_chord() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let t = tube(&x, &[0.0, -10.0, -10.0, -10.0, 2.0], &[0.0, 10.0, 10.0, 10.0, 2.0]);
        let s = taut_string_solve(&t);
        assert_eq!(s.knots.len(), 2);
        assert_eq!(s.slopes(), vec![0.5; 4]);
        assert_eq!(count_local_extremes(&s.slopes()), 0);
    }

    #[test]
    fn binding_middle_gate() {
        // Chord height at x = 1 is 1; the gate caps it at 0.5.
        let t = tube(&[0.0, 1.0, 2.0], &[0.0, -1.0, 2.0], &[0.0, 0.5, 2.0]);
        let s = taut_string_solve(&t);
        assert_eq!(s.knots.len(), 3);
        assert_eq!(s.knots[1].touch, Touch::UpperBoundary);
        assert_eq!(s.knots[1].value, 0.5);
        assert_eq!(s.slopes(), vec![0.5, 1.5]);

        let t = tube(&[0.0, 1.0, 2.0], &[0.0, 1.5, 2.0], &[0.0, 3.0, 2.0]);
        let s = taut_string_solve(&t);
        assert_eq!(s.knots[1].touch, Touch::LowerBoundary);
        assert_eq!(s.slopes(), vec![1.5, 0.5]);
    }

    #[test]
    fn zero_width_interpolates() {
        let y = [0.3, -1.0, 2.0, 2.0, 0.5];
        let mut c = vec![0.0];
        for v in y {
            c.push(c.last().unwrap() + v);
        }
        let x: Vec<f64> = (0..=5).map(f64::from).collect();
        let t = Tube::around(x, &c, &[0.0; 6]).unwrap();
        let s = taut_string_solve(&t);
        assert_eq!(s.slopes(), y.to_vec());
    }

    #[test]
    fn infeasible_and_malformed_tubes() {
        let x = vec![0.0, 1.0, 2.0];
        assert_eq!(
            Tube::new(x.clone(), vec![0.0, 1.0, 0.0], vec![0.0, 0.5, 0.0], 0.0, 0.0),
            Err(Error::InfeasibleTube(1))
        );
        assert_eq!(
            Tube::new(x.clone(), vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0], 2.0, 0.0),
            Err(Error::InfeasibleTube(0))
        );
        assert!(Tube::new(vec![0.0, 0.0], vec![0.0; 2], vec![0.0; 2], 0.0, 0.0).is_err());
    }

    #[test]
    fn zigzag_follows_both_bounds() {
        let x: Vec<f64> = (0..=6).map(f64::from).collect();
        let lower = [0.0, 0.9, -0.1, 0.9, -0.1, 0.9, 0.0];
        let upper = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let s = taut_string_solve(&tube(&x, &lower, &upper));
        assert_eq!(s.knots.len(), 7);
        let slopes = s.slopes();
        assert_eq!(count_local_extremes(&slopes), 4);
        let v = s.values_at(&x);
        for m in 0..=6 {
            assert!(lower[m] <= v[m] && v[m] <= upper[m]);
        }
    }

    fn grid_sample(label: &str, y: Vec<f64>) -> Sample {
        let n = y.len();
        Sample::from_columns(label, (1..=n).map(|i| i as f64 / n as f64).collect(), y).unwrap()
    }

    fn spec(sigma: f64, tau: f64) -> RegionSpec {
        RegionSpec::new(IntervalScheme::dyadic(), sigma, Threshold::Tau(tau)).unwrap()
    }

    #[test]
    fn monotone_noiseless_fit_has_no_extremes() {
        let y: Vec<f64> = (1..=64).map(|i| (i as f64 / 64.0).powi(2)).collect();
        let s = grid_sample("a", y);
        let fit = joint_taut_fit(&[s], &[spec(0.1, 3.0)], &FitConfig::default()).unwrap();
        assert_eq!(fit.n_local_extremes, 0);
        assert!(fit.memberships[0].is_member);
        assert!(fit.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn incompatible_samples_are_rejected() {
        let a = grid_sample("a", vec![0.0; 32]);
        let b = grid_sample("b", vec![10.0; 32]);
        let specs = [spec(0.1, 2.0), spec(0.1, 2.0)];
        assert_eq!(
            joint_taut_fit(&[a, b], &specs, &FitConfig::default()),
            Err(Error::NoJointApproximation)
        );
    }

    #[test]
    fn squeezing_recovers_a_spike() {
        let mut y = vec![0.0; 40];
        y[20] = 5.0;
        let s = grid_sample("a", y);
        let config = FitConfig {
            record_widths: true,
            ..FitConfig::default()
        };
        let fit = joint_taut_fit(&[s], &[spec(0.2, 2.0)], &config).unwrap();
        assert!(fit.squeeze_rounds > 0);
        assert_eq!(fit.n_local_extremes, 1);
        assert!(fit.memberships[0].is_member);
        let widths: Vec<&Vec<f64>> = fit.history.iter().map(|r| r.widths.as_ref().unwrap()).collect();
        for pair in widths.windows(2) {
            assert!(pair[0].iter().zip(pair[1]).all(|(a, b)| b <= a));
        }
    }

    #[test]
    fn config_validation() {
        let s = grid_sample("a", vec![1.0, 2.0, 3.0]);
        let bad = FitConfig {
            squeeze: 1.0,
            ..FitConfig::default()
        };
        assert!(joint_taut_fit(std::slice::from_ref(&s), &[spec(1.0, 1.0)], &bad).is_err());
        assert!(joint_taut_fit(&[s], &[], &FitConfig::default()).is_err());
    }
}
