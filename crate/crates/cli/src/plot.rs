// SPDX-License-Identifier: Apache-2.0

//! Static SVG output: data with the joint fit, and power curves with one
//! panel per scenario.

use std::path::Path;

use anyhow::{anyhow, Result};
use jointapprox::sim::PowerRow;
use jointapprox::two_sample::Method;
use jointapprox::Sample;
use plotters::prelude::*;

const PALETTE: [RGBColor; 4] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
];

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

// Text needs a font backend, which is compiled out; charts carry no labels
// and the legend lives in the accompanying JSON/CSV.
pub fn fit(path: &Path, samples: &[Sample], t: &[f64], values: &[f64]) -> Result<()> {
    let root = SVGBackend::new(path, (900, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| anyhow!("{e}"))?;
    let (ylo, yhi) = span(samples.iter().flat_map(|s| s.y().iter().copied()).chain(values.iter().copied()));
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .build_cartesian_2d(0.0..1.0, ylo..yhi)
        .map_err(|e| anyhow!("{e}"))?;
    for (i, s) in samples.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(s.points().map(|(x, y)| Circle::new((x, y), 2, color.mix(0.6).filled())))
            .map_err(|e| anyhow!("{e}"))?;
    }
    chart
        .draw_series(LineSeries::new(t.iter().copied().zip(values.iter().copied()), BLACK.stroke_width(2)))
        .map_err(|e| anyhow!("{e}"))?;
    root.present().map_err(|e| anyhow!("{e}"))?;
    Ok(())
}

pub fn power(path: &Path, rows: &[PowerRow]) -> Result<()> {
    let mut shapes: Vec<&str> = Vec::new();
    for r in rows {
        if !shapes.contains(&r.g.as_str()) {
            shapes.push(&r.g);
        }
    }
    let root = SVGBackend::new(path, (1000, 800)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| anyhow!("{e}"))?;
    let cols = if shapes.len() > 1 { 2 } else { 1 };
    let panels = root.split_evenly((shapes.len().div_ceil(cols), cols));
    for (panel, g) in panels.iter().zip(&shapes) {
        let (xlo, xhi) = span(rows.iter().filter(|r| r.g == *g).map(|r| r.eta));
        let mut chart = ChartBuilder::on(panel)
            .margin(15)
            .build_cartesian_2d(xlo..xhi, 0.0..1.0)
            .map_err(|e| anyhow!("{e}"))?;
        for (i, method) in Method::ALL.iter().enumerate() {
            let curve: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.g == *g && r.method == *method)
                .map(|r| (r.eta, r.power))
                .collect();
            if curve.is_empty() {
                continue;
            }
            let color = PALETTE[i % PALETTE.len()];
            chart
                .draw_series(LineSeries::new(curve.iter().copied(), color.stroke_width(2)))
                .map_err(|e| anyhow!("{e}"))?;
            chart
                .draw_series(curve.iter().map(|&p| Circle::new(p, 3, color.filled())))
                .map_err(|e| anyhow!("{e}"))?;
        }
    }
    root.present().map_err(|e| anyhow!("{e}"))?;
    Ok(())
}
