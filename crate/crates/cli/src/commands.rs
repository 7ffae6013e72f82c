// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use jointapprox::cache::CalibrationCache;
use jointapprox::calibration::{calibrate_with, CalibrationRequest, CalibrationResult, Target};
use jointapprox::io::{read_samples_file, write_fit, write_power, ReadOptions};
use jointapprox::joint::{adjust_level, joint_region_empty, JointRegionSpec};
use jointapprox::par::Execution;
use jointapprox::region::{RegionSpec, Threshold};
use jointapprox::scale::{sigma_honest, sigma_median};
use jointapprox::sim::{calibrate_criticals, run_power_study, PowerConfig};
use jointapprox::taut::{joint_taut_fit, FitConfig};
use jointapprox::two_sample::{
    an_two_sample_test, delgado_test, detection_bound, fanlin_test, BoundKind, DeviationScenario,
    Method,
};
use jointapprox::Sample;
use serde_json::json;

use crate::manifest::{write_json, Manifest};
use crate::{plot, Cli, Command, Global, Kind, MonteCarlo, RegionArgs};

/// A command line that parsed but does not make sense; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    fs::create_dir_all(&g.out).with_context(|| format!("creating {}", g.out.display()))?;
    match &cli.command {
        Command::Sigma { inputs } => sigma(g, inputs),
        Command::Calibrate { target, n, alpha, mc } => calibrate(g, *target, *n as usize, *alpha, mc),
        Command::Jointcheck { region, inputs } => jointcheck(g, region, inputs),
        Command::Jointfit {
            region,
            squeeze,
            max_rounds,
            inputs,
        } => jointfit(g, region, *squeeze, *max_rounds, inputs),
        Command::Test {
            method,
            alpha,
            critical,
            mc,
            first,
            second,
        } => test(g, *method, *alpha, *critical, mc, first, second),
        Command::Power {
            g: shapes,
            etas,
            n,
            alpha,
            reps,
            seed,
            cal_reps,
        } => {
            if etas.iter().any(|e| !e.is_finite()) {
                return Err(usage("--etas must be finite numbers"));
            }
            let mut config = PowerConfig::new(shapes.clone(), etas.clone(), *n as usize);
            config.replications = *reps as usize;
            config.master_seed = *seed;
            config.scheme = g.scheme;
            power(g, config, *alpha, *cal_reps as usize)
        }
        Command::Bounds {
            kind,
            n,
            sigma1,
            sigma2,
            delta,
            tau,
            gamma,
            lambda,
        } => {
            let scenario = DeviationScenario {
                eta: 0.0,
                delta: *delta,
                n: *n as usize,
                sigma1: *sigma1,
                sigma2: *sigma2,
                tau: *tau,
                gamma: *gamma,
                lambda: *lambda,
            };
            bounds(g, *kind, scenario)
        }
    }
}

fn cache(g: &Global) -> Result<Option<CalibrationCache>> {
    if g.no_cache {
        return Ok(None);
    }
    Ok(Some(CalibrationCache::default_location()?))
}

fn calibrate_cached(g: &Global, req: &CalibrationRequest) -> Result<CalibrationResult> {
    Ok(match cache(g)? {
        Some(c) => c.get_or_calibrate(req, Execution::Auto)?,
        None => calibrate_with(req, Execution::Auto)?,
    })
}

fn read_inputs(g: &Global, inputs: &[PathBuf]) -> Result<Vec<Sample>> {
    let opts = ReadOptions { rescale: g.rescale };
    let mut samples = Vec::new();
    for p in inputs {
        samples.extend(read_samples_file(p, opts)?);
    }
    Ok(samples)
}

/// Writes to stdout; a closed pipe (as in `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(&text)
}

fn sigma(g: &Global, inputs: &[PathBuf]) -> Result<()> {
    let samples = read_inputs(g, inputs)?;
    let rows = samples
        .iter()
        .map(|s| {
            // The honest estimate needs 100 points; report null below that.
            let honest = sigma_honest(s).ok().map(|e| e.value);
            Ok(json!({
                "sample": s.label(),
                "n": s.len(),
                "sigma_median": sigma_median(s)?.value,
                "sigma_honest": honest,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = json!({ "samples": rows });
    let out = g.out.join("sigma.json");
    write_json(&out, &report)?;
    let mut m = Manifest::new("sigma", g.scheme.to_string());
    m.add_inputs(inputs)?;
    m.write(&g.out, &[out])?;
    print_json(&report)?;
    Ok(())
}

fn calibrate(g: &Global, target: Target, n: usize, alpha: f64, mc: &MonteCarlo) -> Result<()> {
    let req = CalibrationRequest::new(target, n, alpha)
        .with_scheme(g.scheme)
        .with_replications(mc.reps as usize)
        .with_seed(mc.seed);
    req.validate().map_err(|e| usage(e.to_string()))?;
    let result = calibrate_cached(g, &req)?;
    let out = g.out.join(format!("calibration-{}.json", target.as_str()));
    write_json(&out, &result)?;
    let mut m = Manifest::new("calibrate", g.scheme.to_string());
    m.seed = Some(mc.seed);
    m.thresholds = json!({ target.as_str(): result.threshold });
    m.write(&g.out, &[out])?;
    print_json(&result)?;
    Ok(())
}

/// Per-sample region specs at level `alpha^(1/k)`.
fn region_specs(g: &Global, region: &RegionArgs, samples: &[Sample]) -> Result<JointRegionSpec> {
    if samples.len() < 2 {
        return Err(usage("need at least two samples"));
    }
    let alpha_k = adjust_level(region.alpha, samples.len())?;
    let specs = samples
        .iter()
        .map(|s| {
            let value = match region.threshold {
                Some(v) => v,
                None => {
                    let target = match region.kind {
                        Kind::Tau => Target::TauSingle,
                        Kind::Gamma => Target::GammaSingle,
                    };
                    let req = CalibrationRequest::new(target, s.len(), alpha_k)
                        .with_scheme(g.scheme)
                        .with_replications(region.mc.reps as usize)
                        .with_seed(region.mc.seed);
                    calibrate_cached(g, &req)?.threshold
                }
            };
            let threshold = match region.kind {
                Kind::Tau => Threshold::Tau(value),
                Kind::Gamma => Threshold::Gamma(value),
            };
            let scale = if region.honest { sigma_honest(s)? } else { sigma_median(s)? };
            Ok(RegionSpec::new(g.scheme, scale.value, threshold)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(JointRegionSpec::new(specs, region.alpha)?)
}

fn specs_json(samples: &[Sample], spec: &JointRegionSpec) -> serde_json::Value {
    let rows: Vec<_> = samples
        .iter()
        .zip(spec.specs())
        .map(|(s, r)| json!({ "sample": s.label(), "sigma": r.sigma, "threshold": r.threshold }))
        .collect();
    json!({ "alpha": spec.alpha(), "alpha_k": spec.alpha_k(), "samples": rows })
}

fn jointcheck(g: &Global, region: &RegionArgs, inputs: &[PathBuf]) -> Result<()> {
    let samples = read_inputs(g, inputs)?;
    let spec = region_specs(g, region, &samples)?;
    let report = joint_region_empty(&samples, &spec)?;
    let per_sample: Vec<_> = samples
        .iter()
        .zip(&report.membership.per_sample)
        .map(|(s, m)| {
            json!({
                "sample": s.label(),
                "is_member": m.is_member,
                "max_ratio": m.max_ratio,
                "violations": m.violations,
            })
        })
        .collect();
    let summary = json!({
        "verdict": report.verdict,
        "empty": report.empty,
        "supports": report.supports,
        "per_sample": per_sample,
    });
    let out = g.out.join("jointcheck.json");
    write_json(&out, &summary)?;
    let mut m = Manifest::new("jointcheck", g.scheme.to_string());
    m.seed = region.threshold.is_none().then_some(region.mc.seed);
    m.add_inputs(inputs)?;
    m.thresholds = specs_json(&samples, &spec);
    m.write(&g.out, &[out])?;
    print_json(&summary)?;
    Ok(())
}

fn jointfit(
    g: &Global,
    region: &RegionArgs,
    squeeze: f64,
    max_rounds: usize,
    inputs: &[PathBuf],
) -> Result<()> {
    let samples = read_inputs(g, inputs)?;
    let spec = region_specs(g, region, &samples)?;
    let config = FitConfig {
        squeeze,
        max_rounds,
        record_widths: false,
    };
    let fit = joint_taut_fit(&samples, spec.specs(), &config)?;

    let fit_path = g.out.join("fit.csv");
    write_fit(BufWriter::new(File::create(&fit_path)?), &fit.t, &fit.values)?;
    let summary = json!({
        "n_local_extremes": fit.n_local_extremes,
        "squeeze_rounds": fit.squeeze_rounds,
        "rounds": fit.history.iter().map(|r| json!({
            "round": r.round,
            "violations": r.violations,
            "n_local_extremes": r.n_local_extremes,
            "squeezed": r.squeezed,
        })).collect::<Vec<_>>(),
    });
    let summary_path = g.out.join("fit.json");
    write_json(&summary_path, &summary)?;

    let mut outputs = vec![fit_path, summary_path];
    if g.plot {
        let svg = g.out.join("fit.svg");
        plot::fit(&svg, &samples, &fit.t, &fit.values)?;
        outputs.push(svg);
    }
    let mut m = Manifest::new("jointfit", g.scheme.to_string());
    m.seed = region.threshold.is_none().then_some(region.mc.seed);
    m.add_inputs(inputs)?;
    m.thresholds = specs_json(&samples, &spec);
    m.write(&g.out, &outputs)?;
    print_json(&summary)?;
    Ok(())
}

fn test(
    g: &Global,
    method: Method,
    alpha: f64,
    critical: Option<f64>,
    mc: &MonteCarlo,
    first: &Path,
    second: &Path,
) -> Result<()> {
    let inputs = [first.to_path_buf(), second.to_path_buf()];
    let samples = read_inputs(g, &inputs)?;
    let [a, b] = samples.as_slice() else {
        return Err(usage(format!("expected two samples, found {}", samples.len())));
    };
    if !a.same_support(b) {
        return Err(jointapprox::Error::SupportMismatch.into());
    }
    let n = a.len();
    let calibrated = |target: Target| -> Result<f64> {
        let req = CalibrationRequest::new(target, n, alpha)
            .with_scheme(g.scheme)
            .with_replications(mc.reps as usize)
            .with_seed(mc.seed);
        Ok(calibrate_cached(g, &req)?.threshold)
    };
    let outcome = match method {
        // Without an explicit value, Delgado uses the asymptotic critical.
        Method::Delgado => delgado_test(a, b, alpha, critical)?,
        Method::FanLin => fanlin_test(a, b, alpha, Some(match critical {
            Some(c) => c,
            None => calibrated(Target::FanLinFinite)?,
        }))?,
        Method::An => {
            let tau = match critical {
                Some(c) => c,
                None => calibrated(Target::TauTwoSample)?,
            };
            an_two_sample_test(a, b, Threshold::Tau(tau), &g.scheme, alpha)?
        }
        Method::AnStar => {
            let gamma = match critical {
                Some(c) => c,
                None => calibrated(Target::GammaTwoSample)?,
            };
            an_two_sample_test(a, b, Threshold::Gamma(gamma), &g.scheme, alpha)?
        }
    };
    let out = g.out.join(format!("test-{}.json", method.as_str()));
    write_json(&out, &outcome)?;
    let mut m = Manifest::new("test", g.scheme.to_string());
    m.seed = (critical.is_none() && method != Method::Delgado).then_some(mc.seed);
    m.add_inputs(&inputs)?;
    m.thresholds = json!({ method.as_str(): outcome.critical_value });
    m.write(&g.out, &[out])?;
    print_json(&outcome)?;
    Ok(())
}

fn power(g: &Global, config: PowerConfig, alpha: f64, cal_reps: usize) -> Result<()> {
    let cache = cache(g)?;
    let crit = calibrate_criticals(
        config.n,
        config.scheme,
        alpha,
        cal_reps,
        config.master_seed,
        Execution::Auto,
        cache.as_ref(),
    )?;
    let rows = run_power_study(&config, &crit, Execution::Auto)?;
    let csv_path = g.out.join("power.csv");
    write_power(BufWriter::new(File::create(&csv_path)?), &rows)?;
    let mut outputs = vec![csv_path];
    if g.plot {
        let svg = g.out.join("power.svg");
        plot::power(&svg, &rows)?;
        outputs.push(svg);
    }
    let mut m = Manifest::new("power", g.scheme.to_string());
    m.seed = Some(config.master_seed);
    m.thresholds = json!({
        "size": 1.0 - alpha,
        "calibration_replications": cal_reps,
        "criticals": crit,
    });
    m.write(&g.out, &outputs)?;
    emit(&format!("wrote {} rows to {}\n", rows.len(), g.out.join("power.csv").display()))
}

fn bounds(g: &Global, kind: BoundKind, scenario: DeviationScenario) -> Result<()> {
    // With lambda given, the all-intervals bound is evaluated for the
    // multiscale scheme (the extra sqrt(lambda) factor).
    let kind = match (kind, scenario.lambda) {
        (BoundKind::TauAll, Some(_)) => BoundKind::TauMultiScale,
        (k, _) => k,
    };
    let value = detection_bound(&scenario, kind)?;
    let out = g.out.join("bounds.json");
    write_json(&out, &json!({ "kind": kind, "scenario": scenario, "eta": value }))?;
    let mut m = Manifest::new("bounds", g.scheme.to_string());
    m.thresholds = json!({ "tau": scenario.tau, "gamma": scenario.gamma, "lambda": scenario.lambda });
    m.write(&g.out, &[out])?;
    emit(&format!("{value:.3}\n"))
}
