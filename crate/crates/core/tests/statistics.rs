// SPDX-License-Identifier: Apache-2.0

//! Monte Carlo properties of calibration, the two-sample tests, joint
//! regions and the power study.

mod common;

use jointapprox::calibration::{calibrate_with, CalibrationRequest, CalibrationResult, Target};
use jointapprox::data::Sample;
use jointapprox::intervals::IntervalScheme;
use jointapprox::joint::{joint_contains, joint_region_empty, JointRegionSpec};
use jointapprox::par::Execution;
use jointapprox::region::{membership, region_contains, RegionSpec, Threshold};
use jointapprox::rng::stream_rng;
use jointapprox::sim::{run_power_study, Criticals, GShape, PowerConfig};
use jointapprox::two_sample::{delgado_test, TwoSampleKernel, Workspace};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn calibrate(target: Target, n: usize, alpha: f64, reps: usize) -> CalibrationResult {
    let req = CalibrationRequest::new(target, n, alpha)
        .with_replications(reps)
        .with_seed(7);
    calibrate_with(&req, Execution::Auto).unwrap()
}

fn grid(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / n as f64).collect()
}

fn noise(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn binomial_se(p: f64, reps: usize) -> f64 {
    (p * (1.0 - p) / reps as f64).sqrt()
}

#[test]
fn asymptotic_delgado_matches_brownian_series() {
    // A walk of m steps undershoots the Brownian maximum by about
    // 0.5826 / sqrt(m).
    const SE_MULTIPLE: f64 = 3.0;
    let walk_bias = 0.5826 / (10_000f64).sqrt();
    let got = calibrate(Target::DelgadoAsymptotic, 500, 0.95, 10_000);
    let oracle = common::brownian_max_quantile(0.95);
    assert!(
        (got.threshold - oracle).abs() <= SE_MULTIPLE * got.standard_error + walk_bias,
        "{} vs {oracle} (se {})",
        got.threshold,
        got.standard_error
    );
}

#[test]
fn standard_error_shrinks_like_root_reps() {
    // Order-statistic bands are noisy at 10^3 replications; the ratio
    // should be 2 and the band accepts 1.4..2.8.
    const RATIO_RANGE: (f64, f64) = (1.4, 2.8);
    for target in [Target::TauSingle, Target::DelgadoFinite] {
        let small = calibrate(target, 200, 0.95, 1_000).standard_error;
        let large = calibrate(target, 200, 0.95, 4_000).standard_error;
        let ratio = small / large;
        assert!(
            (RATIO_RANGE.0..=RATIO_RANGE.1).contains(&ratio),
            "{target:?}: {small} / {large} = {ratio}"
        );
    }
}

#[test]
fn calibrated_tau_gives_nominal_coverage() {
    const REPS: usize = 3_000;
    const SE_MULTIPLE: f64 = 3.0;
    let (n, alpha) = (200, 0.9);
    let tau = calibrate(Target::TauSingle, n, alpha, 10_000).threshold;
    let spec = RegionSpec::new(IntervalScheme::dyadic(), 1.0, Threshold::Tau(tau)).unwrap();
    let g = vec![0.0; n];
    let covered = (0..REPS)
        .filter(|&r| {
            let mut rng = stream_rng(99, &[1], r as u64);
            let s = Sample::from_columns("z", grid(n), noise(&mut rng, n)).unwrap();
            region_contains(&g, &s, &spec).unwrap().is_member
        })
        .count();
    let freq = covered as f64 / REPS as f64;
    assert!(
        (freq - alpha).abs() <= SE_MULTIPLE * binomial_se(alpha, REPS),
        "coverage {freq}"
    );
}

#[test]
fn calibrated_gamma_gives_nominal_coverage() {
    const REPS: usize = 3_000;
    const SE_MULTIPLE: f64 = 3.0;
    let (n, alpha) = (200, 0.9);
    let gamma = calibrate(Target::GammaSingle, n, alpha, 10_000).threshold;
    let spec = RegionSpec::new(IntervalScheme::dyadic(), 1.0, Threshold::Gamma(gamma)).unwrap();
    let g = vec![0.0; n];
    let covered = (0..REPS)
        .filter(|&r| {
            let mut rng = stream_rng(99, &[2], r as u64);
            let s = Sample::from_columns("z", grid(n), noise(&mut rng, n)).unwrap();
            membership(&g, &s, &spec).unwrap().is_member
        })
        .count();
    let freq = covered as f64 / REPS as f64;
    assert!(
        (freq - alpha).abs() <= SE_MULTIPLE * binomial_se(alpha, REPS),
        "coverage {freq}"
    );
}

#[test]
fn calibrated_two_sample_tests_hold_their_size() {
    const REPS: usize = 4_000;
    const SE_MULTIPLE: f64 = 3.0;
    let (n, size) = (300, 0.05);
    let crit = Criticals {
        delgado: Some(calibrate(Target::DelgadoFinite, n, 1.0 - size, 10_000).threshold),
        fanlin: Some(calibrate(Target::FanLinFinite, n, 1.0 - size, 10_000).threshold),
        an_tau: Some(calibrate(Target::TauTwoSample, n, 1.0 - size, 10_000).threshold),
        an_gamma: Some(calibrate(Target::GammaTwoSample, n, 1.0 - size, 10_000).threshold),
    };
    let kernel = TwoSampleKernel::new(n, &IntervalScheme::dyadic());
    let mut ws = Workspace::default();
    let mut rejections = [0usize; 4];
    for r in 0..REPS {
        let mut rng = stream_rng(1234, &[3], r as u64);
        let y1 = noise(&mut rng, n);
        let y2 = noise(&mut rng, n);
        let stats = kernel.statistics(&y1, &y2, &mut ws);
        for (slot, method) in jointapprox::two_sample::Method::ALL.iter().enumerate() {
            rejections[slot] += crit.rejects(*method, &stats).unwrap() as usize;
        }
    }
    let band = SE_MULTIPLE * binomial_se(size, REPS);
    for (method, count) in jointapprox::two_sample::Method::ALL.iter().zip(rejections) {
        let freq = count as f64 / REPS as f64;
        assert!((freq - size).abs() <= band, "{method}: size {freq}");
    }
}

fn pair(seed: u64, n: usize, shift: f64) -> (Sample, Sample) {
    let mut rng = stream_rng(seed, &[4], 0);
    let t = grid(n);
    let f = |x: f64| (3.0 * x).sin();
    let y1 = t.iter().map(|&x| f(x) + 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
    let y2 = t.iter().map(|&x| f(x) + shift + 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
    (
        Sample::from_columns("a", t.clone(), y1).unwrap(),
        Sample::from_columns("b", t, y2).unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn delgado_is_scale_free(seed in 0u64..1000, c in 0.01f64..100.0, shift in 0.0f64..0.5) {
        let (a, b) = pair(seed, 100, shift);
        let scaled = |s: &Sample| s.with_y(s.y().iter().map(|v| c * v).collect()).unwrap();
        let base = delgado_test(&a, &b, 0.95, None).unwrap();
        let again = delgado_test(&scaled(&a), &scaled(&b), 0.95, None).unwrap();
        prop_assert!((base.statistic - again.statistic).abs() <= 1e-9 * base.statistic.max(1.0));
    }

    #[test]
    fn joint_membership_is_the_conjunction(seed in 0u64..1000, offset in -0.5f64..0.5, tau in 0.5f64..3.0) {
        let (a, b) = pair(seed, 60, 0.2);
        let g: Vec<f64> = a.t().iter().map(|&x| (3.0 * x).sin() + offset).collect();
        let specs: Vec<RegionSpec> = [0.3, 0.3]
            .iter()
            .map(|&s| RegionSpec::new(IntervalScheme::dyadic(), s, Threshold::Tau(tau)).unwrap())
            .collect();
        let spec = JointRegionSpec::new(specs.clone(), 0.95).unwrap();
        let joint = joint_contains(&g, &[a.clone(), b.clone()], &spec).unwrap();
        let each = region_contains(&g, &a, &specs[0]).unwrap().is_member
            && region_contains(&g, &b, &specs[1]).unwrap().is_member;
        prop_assert_eq!(joint.is_member, each);
    }

    #[test]
    fn larger_threshold_never_empties_the_region(seed in 0u64..1000, shift in 0.0f64..1.0, tau in 0.5f64..3.0, extra in 0.0f64..2.0) {
        let (a, b) = pair(seed, 80, shift);
        let samples = [a, b];
        let empty = |t: f64| {
            let spec = JointRegionSpec::with_threshold(&samples, IntervalScheme::dyadic(), 0.95, Threshold::Tau(t)).unwrap();
            joint_region_empty(&samples, &spec).unwrap().empty
        };
        if !empty(tau) {
            prop_assert!(!empty(tau + extra));
        }
    }
}

#[test]
fn power_is_monotone_in_eta() {
    // Isotonic tolerance: a dip of up to 2 standard errors is allowed.
    const SLACK_SE: f64 = 2.0;
    let n = 200;
    let crit = Criticals {
        delgado: Some(calibrate(Target::DelgadoFinite, n, 0.95, 4_000).threshold),
        fanlin: Some(calibrate(Target::FanLinFinite, n, 0.95, 4_000).threshold),
        an_tau: Some(calibrate(Target::TauTwoSample, n, 0.95, 4_000).threshold),
        an_gamma: Some(calibrate(Target::GammaTwoSample, n, 0.95, 4_000).threshold),
    };
    let shapes = vec![GShape::G1Shift, GShape::G2Split, GShape::G3Bump, GShape::G4Dipole];
    let mut config = PowerConfig::new(shapes.clone(), vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0], n);
    config.replications = 300;
    let rows = run_power_study(&config, &crit, Execution::Auto).unwrap();
    for g in &shapes {
        for method in jointapprox::two_sample::Method::ALL {
            let curve: Vec<_> = rows.iter().filter(|r| r.g == g.id() && r.method == method).collect();
            assert_eq!(curve.len(), 6);
            for w in curve.windows(2) {
                let slack = SLACK_SE * (w[0].se.powi(2) + w[1].se.powi(2)).sqrt();
                assert!(
                    w[1].power + slack >= w[0].power,
                    "{} {method}: {} at eta {} after {} at eta {}",
                    g.id(),
                    w[1].power,
                    w[1].eta,
                    w[0].power,
                    w[0].eta
                );
            }
        }
    }
}
