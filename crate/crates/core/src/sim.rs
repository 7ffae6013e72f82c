// SPDX-License-Identifier: Apache-2.0

//! Two-sample scenarios on the grid `t_i = i/n` and the power study that
//! compares the four equivalence tests on them.
//!
//! Sample one is pure noise and sample two is `g(t_i)` plus noise, where `g`
//! is one of
//!
//! * `g1 = eta`;
//! * `g2 = eta` on `[0, 1/2]`, `-eta` on `(1/2, 1]`;
//! * `g3 = eta` on `(U, U + 1/4]`;
//! * `g4 = eta` on `(U, U + 1/8]`, `-eta` on `(U + 1/8, U + 1/4]`;
//!
//! with `U ~ Uniform[0, 3/4]` drawn afresh for every replication.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cache::CalibrationCache;
use crate::calibration::{calibrate_with, CalibrationRequest, Target};
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::intervals::IntervalScheme;
use crate::par::{map_with_scratch, Execution};
use crate::rng::{stream_rng, StreamRng};
use crate::two_sample::{Method, TwoSampleKernel, TwoSampleStatistics, Workspace};

const SCENARIO_TAG: u64 = 0x5C;
const POWER_TAG: u64 = 0x90;

/// `height` on `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub lo: f64,
    pub hi: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "steps", rename_all = "snake_case")]
pub enum GShape {
    G1Shift,
    G2Split,
    G3Bump,
    G4Dipole,
    /// Sum of steps, each scaled by `eta`.
    Custom(Vec<Step>),
}

impl GShape {
    pub fn id(&self) -> &'static str {
        match self {
            GShape::G1Shift => "g1",
            GShape::G2Split => "g2",
            GShape::G3Bump => "g3",
            GShape::G4Dipole => "g4",
            GShape::Custom(_) => "custom",
        }
    }

    pub fn needs_u(&self) -> bool {
        matches!(self, GShape::G3Bump | GShape::G4Dipole)
    }

    fn tag(&self) -> u64 {
        match self {
            GShape::G1Shift => 1,
            GShape::G2Split => 2,
            GShape::G3Bump => 3,
            GShape::G4Dipole => 4,
            GShape::Custom(_) => 5,
        }
    }

    /// `g(t)` for deviation height `eta`; `u` is used by the bump shapes.
    pub fn value(&self, eta: f64, u: f64, t: f64) -> f64 {
        let inside = |lo: f64, hi: f64| lo < t && t <= hi;
        match self {
            GShape::G1Shift => eta,
            GShape::G2Split => {
                if t <= 0.5 {
                    eta
                } else {
                    -eta
                }
            }
            GShape::G3Bump => {
                if inside(u, u + 0.25) {
                    eta
                } else {
                    0.0
                }
            }
            GShape::G4Dipole => {
                if inside(u, u + 0.125) {
                    eta
                } else if inside(u + 0.125, u + 0.25) {
                    -eta
                } else {
                    0.0
                }
            }
            GShape::Custom(steps) => steps
                .iter()
                .filter(|s| inside(s.lo, s.hi))
                .map(|s| eta * s.height)
                .sum(),
        }
    }
}

impl fmt::Display for GShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for GShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim_start_matches('g') {
            "1" => Ok(GShape::G1Shift),
            "2" => Ok(GShape::G2Split),
            "3" => Ok(GShape::G3Bump),
            "4" => Ok(GShape::G4Dipole),
            _ => Err(Error::InvalidParameter(format!("unknown scenario '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub g: GShape,
    pub eta: f64,
    pub n: usize,
    pub seed: u64,
    /// Fixed `U`; drawn from the seed when absent and the shape needs it.
    pub u_draw: Option<f64>,
}

impl Scenario {
    pub fn new(g: GShape, eta: f64, n: usize, seed: u64) -> Self {
        Scenario {
            g,
            eta,
            n,
            seed,
            u_draw: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::TooFewPoints { needed: 2, got: self.n });
        }
        if !self.eta.is_finite() {
            return Err(Error::NonFinite);
        }
        if let Some(u) = self.u_draw {
            if !(0.0..=0.75).contains(&u) {
                return Err(Error::InvalidParameter(format!("U must lie in [0, 3/4], got {u}")));
            }
        }
        Ok(())
    }
}

pub fn design(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / n as f64).collect()
}

fn fill_normal(rng: &mut StreamRng, out: &mut Vec<f64>, n: usize) {
    out.clear();
    out.extend((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
}

/// Draws `U` (if needed), then `Z_1`, then `Z_2` from one stream, writing
/// `Y_1 = Z_1` and `Y_2 = g + Z_2` into the buffers. Returns the `U` used.
fn draw_pair(
    g: &GShape,
    eta: f64,
    t: &[f64],
    fixed_u: Option<f64>,
    rng: &mut StreamRng,
    y1: &mut Vec<f64>,
    y2: &mut Vec<f64>,
) -> Option<f64> {
    let u = if g.needs_u() {
        Some(fixed_u.unwrap_or_else(|| rng.random_range(0.0..=0.75)))
    } else {
        None
    };
    let n = t.len();
    fill_normal(rng, y1, n);
    fill_normal(rng, y2, n);
    let uu = u.unwrap_or(0.0);
    for (y, &ti) in y2.iter_mut().zip(t) {
        *y += g.value(eta, uu, ti);
    }
    u
}

/// `(Y_1, Y_2)` with explicit noise vectors.
pub fn generate_with_noise(
    g: &GShape,
    eta: f64,
    u: f64,
    z1: &[f64],
    z2: &[f64],
) -> Result<(Sample, Sample)> {
    if z1.len() != z2.len() {
        return Err(Error::LengthMismatch {
            expected: z1.len(),
            got: z2.len(),
        });
    }
    let t = design(z1.len());
    let y2 = z2.iter().zip(&t).map(|(z, &ti)| z + g.value(eta, u, ti)).collect();
    Ok((
        Sample::from_columns("y1", t.clone(), z1.to_vec())?,
        Sample::from_columns("y2", t, y2)?,
    ))
}

/// Both samples of a scenario, together with the `U` that was used.
pub fn generate_scenario_with_u(scenario: &Scenario) -> Result<(Sample, Sample, Option<f64>)> {
    scenario.validate()?;
    let t = design(scenario.n);
    let mut rng = stream_rng(scenario.seed, &[SCENARIO_TAG, scenario.g.tag()], 0);
    let (mut y1, mut y2) = (Vec::new(), Vec::new());
    let u = draw_pair(
        &scenario.g,
        scenario.eta,
        &t,
        scenario.u_draw,
        &mut rng,
        &mut y1,
        &mut y2,
    );
    Ok((
        Sample::from_columns("y1", t.clone(), y1)?,
        Sample::from_columns("y2", t, y2)?,
        u,
    ))
}

pub fn generate_scenario(scenario: &Scenario) -> Result<(Sample, Sample)> {
    generate_scenario_with_u(scenario).map(|(a, b, _)| (a, b))
}

/// Critical values used by the power study, in the units of
/// [`TwoSampleStatistics`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Criticals {
    pub delgado: Option<f64>,
    pub fanlin: Option<f64>,
    pub an_tau: Option<f64>,
    pub an_gamma: Option<f64>,
}

impl Criticals {
    pub fn get(&self, method: Method) -> Result<f64> {
        let v = match method {
            Method::Delgado => self.delgado,
            Method::FanLin => self.fanlin,
            Method::An => self.an_tau,
            Method::AnStar => self.an_gamma,
        };
        v.ok_or_else(|| Error::MissingCalibration(method.to_string()))
    }

    /// Cumulative-sum test rejects on `>=`, simulated criticals on `>`.
    pub fn rejects(&self, method: Method, stats: &TwoSampleStatistics) -> Result<bool> {
        let c = self.get(method)?;
        let s = stats.get(method);
        Ok(match method {
            Method::Delgado => s >= c,
            _ => s > c,
        })
    }
}

/// Finite-sample criticals for all four tests at size `1 - alpha`.
pub fn calibrate_criticals(
    n: usize,
    scheme: IntervalScheme,
    alpha: f64,
    replications: usize,
    seed: u64,
    exec: Execution,
    cache: Option<&CalibrationCache>,
) -> Result<Criticals> {
    let run = |target: Target| -> Result<f64> {
        let req = CalibrationRequest::new(target, n, alpha)
            .with_scheme(scheme)
            .with_replications(replications)
            .with_seed(seed);
        Ok(match cache {
            Some(c) => c.get_or_calibrate(&req, exec)?,
            None => calibrate_with(&req, exec)?,
        }
        .threshold)
    };
    Ok(Criticals {
        delgado: Some(run(Target::DelgadoFinite)?),
        fanlin: Some(run(Target::FanLinFinite)?),
        an_tau: Some(run(Target::TauTwoSample)?),
        an_gamma: Some(run(Target::GammaTwoSample)?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub methods: Vec<Method>,
    pub shapes: Vec<GShape>,
    pub etas: Vec<f64>,
    pub n: usize,
    pub replications: usize,
    pub master_seed: u64,
    pub scheme: IntervalScheme,
}

impl PowerConfig {
    pub fn new(shapes: Vec<GShape>, etas: Vec<f64>, n: usize) -> Self {
        PowerConfig {
            methods: Method::ALL.to_vec(),
            shapes,
            etas,
            n,
            replications: 1000,
            master_seed: crate::calibration::DEFAULT_SEED,
            scheme: IntervalScheme::dyadic(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub g: String,
    pub eta: f64,
    pub method: Method,
    pub power: f64,
    pub replications: usize,
    /// Binomial standard error `sqrt(p (1 - p) / R)`.
    pub se: f64,
}

/// Rejection frequency of every method for every `(shape, eta)`. Within one
/// `(shape, eta)` all methods see the same simulated pairs; replication `r`
/// draws from the stream keyed by `(seed, shape, eta index, r)`.
pub fn run_power_study(
    config: &PowerConfig,
    criticals: &Criticals,
    exec: Execution,
) -> Result<Vec<PowerRow>> {
    if config.n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: config.n });
    }
    if config.replications == 0 {
        return Err(Error::InvalidParameter("replications must be positive".into()));
    }
    for &m in &config.methods {
        criticals.get(m)?;
    }
    let kernel = TwoSampleKernel::new(config.n, &config.scheme);
    let t = design(config.n);
    let mut rows = Vec::new();
    for g in &config.shapes {
        for (ei, &eta) in config.etas.iter().enumerate() {
            let tags = [POWER_TAG, g.tag(), ei as u64];
            let stats: Vec<TwoSampleStatistics> = map_with_scratch(
                config.replications,
                exec,
                || (Vec::new(), Vec::new(), Workspace::default()),
                |(y1, y2, ws): &mut (Vec<f64>, Vec<f64>, Workspace), r| {
                    let mut rng = stream_rng(config.master_seed, &tags, r as u64);
                    draw_pair(g, eta, &t, None, &mut rng, y1, y2);
                    kernel.statistics(y1, y2, ws)
                },
            );
            for &method in &config.methods {
                let mut hits = 0usize;
                for s in &stats {
                    if criticals.rejects(method, s)? {
                        hits += 1;
                    }
                }
                let r = config.replications as f64;
                let power = hits as f64 / r;
                rows.push(PowerRow {
                    g: g.id().to_string(),
                    eta,
                    method,
                    power,
                    replications: config.replications,
                    se: (power * (1.0 - power) / r).sqrt(),
                });
            }
        }
    }
    Ok(rows)
}
