// SPDX-License-Identifier: Apache-2.0

//! Samples on `[0, 1]` and the precision-weighted merge of several samples
//! onto their common grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::cumulative_sums;

/// One regression sample: strictly increasing design points in `[0, 1]`
/// with their responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    label: String,
    t: Vec<f64>,
    y: Vec<f64>,
}

impl Sample {
    /// Validates raw `(t, y)` pairs: sorts by `t`, rejects duplicates and
    /// points outside `[0, 1]`.
    pub fn new(label: impl Into<String>, points: &[(f64, f64)]) -> Result<Self> {
        validate_sample(label, points)
    }

    pub fn from_columns(label: impl Into<String>, t: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if t.len() != y.len() {
            return Err(Error::LengthMismatch {
                expected: t.len(),
                got: y.len(),
            });
        }
        let points: Vec<(f64, f64)> = t.into_iter().zip(y).collect();
        validate_sample(label, &points)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.t.iter().copied().zip(self.y.iter().copied())
    }

    /// Same design, new responses.
    pub fn with_y(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.t.len() {
            return Err(Error::LengthMismatch {
                expected: self.t.len(),
                got: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Sample {
            label: self.label.clone(),
            t: self.t.clone(),
            y,
        })
    }

    pub fn same_support(&self, other: &Sample) -> bool {
        self.t == other.t
    }
}

pub fn validate_sample(label: impl Into<String>, points: &[(f64, f64)]) -> Result<Sample> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    if points.iter().any(|(t, y)| !t.is_finite() || !y.is_finite()) {
        return Err(Error::NonFinite);
    }
    if let Some(&(t, _)) = points.iter().find(|(t, _)| !(0.0..=1.0).contains(t)) {
        return Err(Error::DesignPointOutOfRange(t));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(w) = sorted.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateDesignPoint(w[0].0));
    }
    if sorted.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: sorted.len(),
        });
    }
    let (t, y) = sorted.into_iter().unzip();
    Ok(Sample {
        label: label.into(),
        t,
        y,
    })
}

/// The sorted union of all design points together with, for every sample,
/// the grid index of each of its points. Ties are exact float equality.
#[derive(Debug, Clone, PartialEq)]
pub struct GridIndex {
    pub t: Vec<f64>,
    pub positions: Vec<Vec<usize>>,
}

impl GridIndex {
    pub fn new(samples: &[Sample]) -> Self {
        let mut all: Vec<f64> = samples.iter().flat_map(|s| s.t.iter().copied()).collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        let positions = samples
            .iter()
            .map(|s| {
                // Both sequences are sorted, so a merge walk suffices.
                let mut out = Vec::with_capacity(s.len());
                let mut m = 0;
                for &ti in &s.t {
                    while all[m] < ti {
                        m += 1;
                    }
                    out.push(m);
                }
                out
            })
            .collect();
        GridIndex { t: all, positions }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Values of a grid function at the points of sample `i`.
    pub fn restrict(&self, g: &[f64], i: usize) -> Vec<f64> {
        self.positions[i].iter().map(|&m| g[m]).collect()
    }
}

/// Union grid with precision-weighted responses and the cumulative sums the
/// taut string runs through.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedGrid {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    /// Sum of `1 / sigma_i^2` over the samples observed at each grid point.
    pub sigma_weight: Vec<f64>,
    /// `cum_y[0] = 0`, `cum_y[m] = sum_{j <= m} sigma_weight[j] * y[j]`.
    pub cum_y: Vec<f64>,
    /// `cum_w[0] = 0`, `cum_w[m] = sum_{j <= m} sigma_weight[j]`.
    pub cum_w: Vec<f64>,
    /// Contributing `(sample, point index)` pairs per grid point.
    pub source_map: Vec<Vec<(usize, usize)>>,
    /// Grid index of every point of every sample.
    pub positions: Vec<Vec<usize>>,
}

impl MergedGrid {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn restrict(&self, g: &[f64], i: usize) -> Vec<f64> {
        self.positions[i].iter().map(|&m| g[m]).collect()
    }
}

pub fn merge_samples(samples: &[Sample], scales: &[f64]) -> Result<MergedGrid> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if scales.len() != samples.len() {
        return Err(Error::LengthMismatch {
            expected: samples.len(),
            got: scales.len(),
        });
    }
    if let Some(&s) = scales.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(Error::ScaleNotPositive(s));
    }
    let index = GridIndex::new(samples);
    let n = index.len();
    let mut source_map: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (i, pos) in index.positions.iter().enumerate() {
        for (j, &m) in pos.iter().enumerate() {
            source_map[m].push((i, j));
        }
    }

    let mut y = Vec::with_capacity(n);
    let mut sigma_weight = Vec::with_capacity(n);
    for sources in &source_map {
        if let [(i, j)] = sources.as_slice() {
            y.push(samples[*i].y[*j]);
            sigma_weight.push(1.0 / (scales[*i] * scales[*i]));
            continue;
        }
        // Sum contributors in a canonical order so the result does not
        // depend on the order the samples were supplied in.
        let mut terms: Vec<(f64, f64)> = sources
            .iter()
            .map(|&(i, j)| (1.0 / (scales[i] * scales[i]), samples[i].y[j]))
            .collect();
        terms.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let w: f64 = terms.iter().map(|(w, _)| w).sum();
        let wy: f64 = terms.iter().map(|(w, v)| w * v).sum();
        y.push(wy / w);
        sigma_weight.push(w);
    }

    let weighted: Vec<f64> = y.iter().zip(&sigma_weight).map(|(v, w)| v * w).collect();
    let cum_y = cumulative_sums(&weighted);
    let cum_w = cumulative_sums(&sigma_weight);

    Ok(MergedGrid {
        t: index.t,
        y,
        sigma_weight,
        cum_y,
        cum_w,
        source_map,
        positions: index.positions,
    })
}

/// How the supports of several samples relate to each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SupportRelation {
    Single,
    Equal,
    Disjoint,
    Overlapping,
}

pub fn support_relation(samples: &[Sample]) -> SupportRelation {
    if samples.len() <= 1 {
        return SupportRelation::Single;
    }
    if samples.windows(2).all(|w| w[0].same_support(&w[1])) {
        return SupportRelation::Equal;
    }
    let index = GridIndex::new(samples);
    let total: usize = samples.iter().map(Sample::len).sum();
    if index.len() == total {
        SupportRelation::Disjoint
    } else {
        SupportRelation::Overlapping
    }
}
