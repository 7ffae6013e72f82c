// SPDX-License-Identifier: Apache-2.0

//! Interval families over which the multiresolution statistics are
//! maximised: all intervals, or the geometric multiscale scheme with
//! factor `lambda` (dyadic for `lambda = 2`) plus singletons.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeKind {
    AllIntervals,
    MultiScale { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalScheme {
    pub kind: SchemeKind,
    pub include_singletons: bool,
}

impl IntervalScheme {
    pub fn all() -> Self {
        IntervalScheme {
            kind: SchemeKind::AllIntervals,
            include_singletons: true,
        }
    }

    pub fn multiscale(lambda: f64) -> Result<Self> {
        if !(lambda > 1.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "multiscale factor must exceed 1, got {lambda}"
            )));
        }
        Ok(IntervalScheme {
            kind: SchemeKind::MultiScale { lambda },
            include_singletons: true,
        })
    }

    /// The default scheme: dyadic intervals plus singletons.
    pub fn dyadic() -> Self {
        IntervalScheme {
            kind: SchemeKind::MultiScale { lambda: 2.0 },
            include_singletons: true,
        }
    }

    pub fn with_singletons(mut self, include: bool) -> Self {
        self.include_singletons = include;
        self
    }

    /// Multiscale factor, if any.
    pub fn lambda(&self) -> Option<f64> {
        match self.kind {
            SchemeKind::AllIntervals => None,
            SchemeKind::MultiScale { lambda } => Some(lambda),
        }
    }
}

impl Default for IntervalScheme {
    fn default() -> Self {
        IntervalScheme::dyadic()
    }
}

impl fmt::Display for IntervalScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SchemeKind::AllIntervals => write!(f, "all")?,
            SchemeKind::MultiScale { lambda } => write!(f, "multi:{lambda}")?,
        }
        if !self.include_singletons {
            write!(f, "-nosingletons")?;
        }
        Ok(())
    }
}

impl FromStr for IntervalScheme {
    type Err = Error;

    /// Accepts `all`, `multi:<lambda>`, optionally suffixed `-nosingletons`.
    fn from_str(s: &str) -> Result<Self> {
        let (body, singletons) = match s.strip_suffix("-nosingletons") {
            Some(b) => (b, false),
            None => (s, true),
        };
        let scheme = if body == "all" {
            IntervalScheme::all()
        } else if let Some(l) = body.strip_prefix("multi:") {
            let lambda: f64 = l
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad multiscale factor '{l}'")))?;
            IntervalScheme::multiscale(lambda)?
        } else {
            return Err(Error::InvalidParameter(format!(
                "unknown scheme '{s}', expected 'all' or 'multi:<lambda>'"
            )));
        };
        Ok(scheme.with_singletons(singletons))
    }
}

/// A 1-based inclusive index range `[lo, hi]` into a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexInterval {
    pub lo: usize,
    pub hi: usize,
}

impl IndexInterval {
    pub fn new(lo: usize, hi: usize) -> Result<Self> {
        if lo == 0 || lo > hi {
            return Err(Error::IndexOutOfRange { lo, hi, len: hi });
        }
        Ok(IndexInterval { lo, hi })
    }

    /// Number of grid points covered.
    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: usize) -> bool {
        self.lo <= i && i <= self.hi
    }
}

impl fmt::Display for IndexInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Intervals of `scheme` on a grid of `n` points.
///
/// Multiscale output is ordered by level `k`, then position `j`, with the
/// singletons appended last; duplicates are dropped on first repeat. An
/// empty grid yields no intervals.
pub fn enumerate_intervals(n: usize, scheme: &IntervalScheme) -> Vec<IndexInterval> {
    if n == 0 {
        return Vec::new();
    }
    match scheme.kind {
        SchemeKind::AllIntervals => {
            let mut out = Vec::with_capacity(n * (n + 1) / 2);
            for lo in 1..=n {
                for hi in lo..=n {
                    out.push(IndexInterval { lo, hi });
                }
            }
            out
        }
        SchemeKind::MultiScale { lambda } => {
            let mut seen = HashSet::new();
            let mut out = Vec::new();
            let levels = ((n as f64).ln() / lambda.ln()).ceil() as i32;
            for k in 1..=levels {
                let scale = lambda.powi(k);
                let count = (n as f64 / scale).ceil() as usize;
                for j in 1..=count {
                    let lo = ((j - 1) as f64 * scale + 1.0).floor() as usize;
                    let hi = ((j as f64 * scale).floor() as usize).min(n);
                    if lo < 1 || lo > hi {
                        continue;
                    }
                    let iv = IndexInterval { lo, hi };
                    if seen.insert(iv) {
                        out.push(iv);
                    }
                }
            }
            if scheme.include_singletons {
                for i in 1..=n {
                    let iv = IndexInterval { lo: i, hi: i };
                    if seen.insert(iv) {
                        out.push(iv);
                    }
                }
            }
            out
        }
    }
}

pub fn interval_count(n: usize, scheme: &IntervalScheme) -> usize {
    match scheme.kind {
        SchemeKind::AllIntervals => n * (n + 1) / 2,
        SchemeKind::MultiScale { .. } => enumerate_intervals(n, scheme).len(),
    }
}

/// Precomputed per-interval constants for fast evaluation of the maximal
/// statistics against a prefix-sum array.
///
/// `start`/`end` index the prefix sums directly: the sum over interval `i`
/// is `prefix[end[i]] - prefix[start[i]]`.
#[derive(Debug, Clone)]
pub struct IntervalTable {
    n: usize,
    intervals: Vec<IndexInterval>,
    start: Vec<u32>,
    end: Vec<u32>,
    inv_sqrt_len: Vec<f64>,
    /// `2 log(n / |I|)`
    log_penalty: Vec<f64>,
    /// `1 / log(log(e^e n / |I|))`
    inv_loglog: Vec<f64>,
}

impl IntervalTable {
    pub fn new(n: usize, scheme: &IntervalScheme) -> Self {
        Self::from_intervals(n, enumerate_intervals(n, scheme))
    }

    pub fn from_intervals(n: usize, intervals: Vec<IndexInterval>) -> Self {
        let len = intervals.len();
        let mut start = Vec::with_capacity(len);
        let mut end = Vec::with_capacity(len);
        let mut inv_sqrt_len = Vec::with_capacity(len);
        let mut log_penalty = Vec::with_capacity(len);
        let mut inv_loglog = Vec::with_capacity(len);
        for iv in &intervals {
            let m = iv.len() as f64;
            start.push((iv.lo - 1) as u32);
            end.push(iv.hi as u32);
            inv_sqrt_len.push(1.0 / m.sqrt());
            let ratio = n as f64 / m;
            log_penalty.push(2.0 * ratio.ln());
            inv_loglog.push(1.0 / loglog_factor(n, iv.len()));
        }
        IntervalTable {
            n,
            intervals,
            start,
            end,
            inv_sqrt_len,
            log_penalty,
            inv_loglog,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn intervals(&self) -> &[IndexInterval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// `|sum_I r| / sqrt(|I|)` for interval `i`.
    #[inline]
    pub fn abs_w(&self, prefix: &[f64], i: usize) -> f64 {
        (prefix[self.end[i] as usize] - prefix[self.start[i] as usize]).abs() * self.inv_sqrt_len[i]
    }

    /// Largest `|w|` over the table.
    pub fn max_abs_w(&self, prefix: &[f64]) -> f64 {
        debug_assert_eq!(prefix.len(), self.n + 1);
        let mut best = 0.0f64;
        for i in 0..self.intervals.len() {
            best = best.max(self.abs_w(prefix, i));
        }
        best
    }

    /// Largest `((w / scale)^2 - 2 log(n/|I|)) / log(log(e^e n/|I|))`.
    pub fn max_gamma_statistic(&self, prefix: &[f64], scale: f64) -> f64 {
        debug_assert_eq!(prefix.len(), self.n + 1);
        let inv = 1.0 / scale;
        let mut best = f64::NEG_INFINITY;
        for i in 0..self.intervals.len() {
            let w = self.abs_w(prefix, i) * inv;
            best = best.max((w * w - self.log_penalty[i]) * self.inv_loglog[i]);
        }
        best
    }

    /// Both maxima in one pass: `(max |w| / scale, gamma statistic)`.
    pub fn max_both(&self, prefix: &[f64], scale: f64) -> (f64, f64) {
        let inv = 1.0 / scale;
        let mut best_w = 0.0f64;
        let mut best_g = f64::NEG_INFINITY;
        for i in 0..self.intervals.len() {
            let w = self.abs_w(prefix, i) * inv;
            best_w = best_w.max(w);
            best_g = best_g.max((w * w - self.log_penalty[i]) * self.inv_loglog[i]);
        }
        (best_w, best_g)
    }

    pub fn log_penalty(&self, i: usize) -> f64 {
        self.log_penalty[i]
    }

    pub fn loglog(&self, i: usize) -> f64 {
        1.0 / self.inv_loglog[i]
    }
}

/// `log(log(e^e n / m))`; equals 1 when `m = n`.
pub fn loglog_factor(n: usize, m: usize) -> f64 {
    (std::f64::consts::E + (n as f64 / m as f64).ln()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(lo: usize, hi: usize) -> IndexInterval {
        IndexInterval { lo, hi }
    }

    #[test]
    fn dyadic_four_points() {
        let got = enumerate_intervals(4, &IntervalScheme::dyadic());
        assert_eq!(
            got,
            vec![iv(1, 2), iv(3, 4), iv(1, 4), iv(1, 1), iv(2, 2), iv(3, 3), iv(4, 4)]
        );
        assert_eq!(interval_count(4, &IntervalScheme::dyadic()), 7);
    }

    #[test]
    fn single_point_grid() {
        for scheme in [IntervalScheme::dyadic(), IntervalScheme::all()] {
            assert_eq!(enumerate_intervals(1, &scheme), vec![iv(1, 1)]);
            assert_eq!(interval_count(1, &scheme), 1);
        }
    }

    #[test]
    fn all_intervals_count() {
        assert_eq!(enumerate_intervals(3, &IntervalScheme::all()).len(), 6);
        assert_eq!(interval_count(3, &IntervalScheme::all()), 6);
    }

    #[test]
    fn dyadic_500_contains_full_range() {
        let ivs = enumerate_intervals(500, &IntervalScheme::dyadic());
        assert!(ivs.contains(&iv(1, 500)));
        assert!(ivs.contains(&iv(257, 500)));
        assert_eq!(ivs.len(), 999);
    }

    #[test]
    fn without_singletons() {
        let s = IntervalScheme::dyadic().with_singletons(false);
        assert_eq!(enumerate_intervals(4, &s), vec![iv(1, 2), iv(3, 4), iv(1, 4)]);
    }

    #[test]
    fn scheme_parsing_round_trips() {
        for s in ["all", "multi:2", "multi:1.5", "multi:2-nosingletons"] {
            let parsed: IntervalScheme = s.parse().unwrap();
            assert_eq!(parsed.to_string(), s);
        }
        assert!("multi:1".parse::<IntervalScheme>().is_err());
        assert!("dyadic".parse::<IntervalScheme>().is_err());
    }

    #[test]
    fn loglog_is_one_on_full_interval() {
        assert!((loglog_factor(500, 500) - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn intervals_in_bounds_and_levels_cover(n in 1usize..300, lambda in 1.1f64..4.0) {
            let scheme = IntervalScheme::multiscale(lambda).unwrap();
            let ivs = enumerate_intervals(n, &scheme);
            prop_assert!(ivs.iter().all(|i| 1 <= i.lo && i.lo <= i.hi && i.hi <= n));
            let unique: HashSet<_> = ivs.iter().collect();
            prop_assert_eq!(unique.len(), ivs.len());
            // Each level's intervals tile [1, n].
            let levels = ((n as f64).ln() / lambda.ln()).ceil() as i32;
            for k in 1..=levels {
                let scale = lambda.powi(k);
                let mut covered = vec![false; n + 1];
                for j in 1..=((n as f64 / scale).ceil() as usize) {
                    let lo = ((j - 1) as f64 * scale + 1.0).floor() as usize;
                    let hi = ((j as f64 * scale).floor() as usize).min(n);
                    prop_assert!(unique.contains(&IndexInterval::new(lo, hi).unwrap()));
                    for c in covered.iter_mut().take(hi + 1).skip(lo) {
                        *c = true;
                    }
                }
                prop_assert!(covered[1..].iter().all(|&c| c));
            }
            // Linear size for fixed lambda.
            let bound = n as f64 * (1.0 + 1.0 / (lambda - 1.0)) + levels as f64 + 1.0;
            prop_assert!((ivs.len() as f64) <= bound);
        }
    }
}
