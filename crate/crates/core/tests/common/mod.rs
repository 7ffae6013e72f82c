// SPDX-License-Identifier: Apache-2.0

//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use jointapprox::taut::Tube;
use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random tube with `cells` cells: abscissae with uneven spacing, a random
/// walk as center and half-widths drawn independently per gate. About one
/// gate in eight has zero width.
pub fn random_tube(rng: &mut ChaCha8Rng, cells: usize) -> Tube {
    let mut x = vec![0.0];
    let mut c = vec![0.0];
    for _ in 0..cells {
        x.push(x.last().unwrap() + rng.random_range(0.2..2.0));
        c.push(c.last().unwrap() + rng.random_range(-2.0..2.0));
    }
    let w: Vec<f64> = (0..=cells)
        .map(|_| if rng.random_bool(0.125) { 0.0 } else { rng.random_range(0.0..1.5) })
        .collect();
    let lower: Vec<f64> = c.iter().zip(&w).map(|(c, w)| c - w).collect();
    let upper: Vec<f64> = c.iter().zip(&w).map(|(c, w)| c + w).collect();
    Tube::new(x, lower, upper, c[0], c[cells]).unwrap()
}

/// Whether some path through the tube has slope changes following `up`
/// (`up[i]` is the direction from slope `i` to slope `i + 1`), checked as
/// a linear feasibility problem in the string heights.
fn pattern_feasible(tube: &Tube, up: &[bool]) -> bool {
    let (x, lo, hi) = (tube.x(), tube.lower(), tube.upper());
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let v: Vec<Variable> = (0..x.len()).map(|m| p.add_var(0.0, (lo[m], hi[m]))).collect();
    for (i, &dir) in up.iter().enumerate() {
        // slope(i + 1) - slope(i) over gates i, i + 1, i + 2
        let (a, b) = (1.0 / (x[i + 1] - x[i]), 1.0 / (x[i + 2] - x[i + 1]));
        let expr = [(v[i + 2], b), (v[i + 1], -b - a), (v[i], a)];
        let op = if dir { ComparisonOp::Ge } else { ComparisonOp::Le };
        p.add_constraint(expr, op, 0.0);
    }
    p.solve().is_ok()
}

fn combinations(n: usize, k: usize, start: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if acc.len() == k {
        out.push(acc.clone());
        return;
    }
    for i in start..n {
        acc.push(i);
        combinations(n, k, i + 1, acc, out);
        acc.pop();
    }
}

/// Fewest local extremes of any slope sequence whose path stays in the
/// tube, by enumerating up/down patterns in order of their number of
/// direction changes.
pub fn min_extremes_oracle(tube: &Tube) -> usize {
    let cells = tube.len() - 1;
    if cells < 3 {
        return 0;
    }
    let dirs = cells - 1;
    for k in 0..dirs {
        let mut sets = Vec::new();
        combinations(dirs - 1, k, 0, &mut Vec::new(), &mut sets);
        for first in [true, false] {
            for changes in &sets {
                let mut up = Vec::with_capacity(dirs);
                let mut d = first;
                for i in 0..dirs {
                    if i > 0 && changes.contains(&(i - 1)) {
                        d = !d;
                    }
                    up.push(d);
                }
                if pattern_feasible(tube, &up) {
                    return k;
                }
            }
        }
    }
    unreachable!("the pattern set always contains the taut string")
}

/// Largest violation of the tube by heights `v`; zero when contained.
pub fn tube_excess(tube: &Tube, v: &[f64]) -> f64 {
    (0..tube.len())
        .map(|m| (tube.lower()[m] - v[m]).max(v[m] - tube.upper()[m]).max(0.0))
        .fold(0.0, f64::max)
}

pub fn polyline_length(x: &[f64], v: &[f64]) -> f64 {
    x.windows(2)
        .zip(v.windows(2))
        .map(|(x, v)| (x[1] - x[0]).hypot(v[1] - v[0]))
        .sum()
}

/// Quantile of `max_{0<=t<=1} |B(t)|` from the series
/// `P(max |B| <= x) = (4/pi) sum_k (-1)^k / (2k+1) exp(-pi^2 (2k+1)^2 / (8 x^2))`.
pub fn brownian_max_quantile(p: f64) -> f64 {
    let cdf = |x: f64| {
        let mut s = 0.0;
        for k in 0..200 {
            let j = (2 * k + 1) as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            s += sign / j * (-std::f64::consts::PI.powi(2) * j * j / (8.0 * x * x)).exp();
        }
        4.0 / std::f64::consts::PI * s
    };
    let (mut lo, mut hi) = (0.1, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
