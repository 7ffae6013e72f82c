// SPDX-License-Identifier: Apache-2.0

//! Structural properties of merging, interval schemes, regions and scale
//! estimates.

use jointapprox::data::{merge_samples, Sample};
use jointapprox::intervals::{enumerate_intervals, IntervalScheme};
use jointapprox::region::{membership, RegionSpec, Threshold};
use jointapprox::rng::stream_rng;
use jointapprox::scale::{sigma_honest, sigma_median};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn sample_from(label: &str, ts: &std::collections::BTreeSet<u32>, ys: &[f64]) -> Sample {
    let t: Vec<f64> = ts.iter().map(|&v| v as f64 / 64.0).collect();
    let y = ys.iter().cycle().take(t.len()).copied().collect();
    Sample::from_columns(label, t, y).unwrap()
}

fn arb_sample(label: &'static str) -> impl Strategy<Value = Sample> {
    (
        prop::collection::btree_set(0u32..=64, 2..20),
        prop::collection::vec(-10.0f64..10.0, 1..20),
    )
        .prop_map(move |(ts, ys)| sample_from(label, &ts, &ys))
}

proptest! {
    #[test]
    fn single_sample_merge_is_identity(s in arb_sample("a"), sigma in 0.01f64..100.0) {
        let m = merge_samples(std::slice::from_ref(&s), &[sigma]).unwrap();
        prop_assert_eq!(&m.t, &s.t().to_vec());
        prop_assert_eq!(&m.y, &s.y().to_vec());
    }

    #[test]
    fn merge_ignores_sample_order(
        a in arb_sample("a"),
        b in arb_sample("b"),
        c in arb_sample("c"),
        sa in 0.1f64..3.0,
        sb in 0.1f64..3.0,
        sc in 0.1f64..3.0,
    ) {
        let m1 = merge_samples(&[a.clone(), b.clone(), c.clone()], &[sa, sb, sc]).unwrap();
        let m2 = merge_samples(&[c, a, b], &[sc, sa, sb]).unwrap();
        prop_assert_eq!(&m1.t, &m2.t);
        prop_assert_eq!(&m1.y, &m2.y);
        prop_assert_eq!(&m1.sigma_weight, &m2.sigma_weight);
        prop_assert_eq!(&m1.cum_w, &m2.cum_w);
    }

    #[test]
    fn common_scale_factor_cancels(
        a in arb_sample("a"),
        b in arb_sample("b"),
        sa in 0.1f64..3.0,
        sb in 0.1f64..3.0,
        // powers of two keep the weights exact
        e in -4i32..4,
    ) {
        let c = 2f64.powi(e);
        let m1 = merge_samples(&[a.clone(), b.clone()], &[sa, sb]).unwrap();
        let m2 = merge_samples(&[a, b], &[c * sa, c * sb]).unwrap();
        prop_assert_eq!(&m1.y, &m2.y);
        for (w1, w2) in m1.cum_w.iter().zip(&m2.cum_w) {
            prop_assert_eq!(*w2, w1 / (c * c));
        }
    }

    #[test]
    fn cum_w_ends_at_total_weight(a in arb_sample("a"), b in arb_sample("b"), sa in 0.1f64..3.0, sb in 0.1f64..3.0) {
        let m = merge_samples(&[a, b], &[sa, sb]).unwrap();
        let total: f64 = m.sigma_weight.iter().sum();
        let last = *m.cum_w.last().unwrap();
        prop_assert!((last - total).abs() <= 4.0 * f64::EPSILON * total, "{} vs {}", last, total);
    }

    #[test]
    fn multiscale_order_and_size(n in 1usize..600, lambda in 1.2f64..4.0) {
        let scheme = IntervalScheme::multiscale(lambda).unwrap();
        let intervals = enumerate_intervals(n, &scheme);
        let again = enumerate_intervals(n, &scheme);
        prop_assert_eq!(&intervals, &again);
        // Every singleton appears once; those not already produced by a
        // level (possible for lambda < 2) are appended in ascending order.
        let singles: Vec<usize> = intervals.iter().filter(|iv| iv.len() == 1).map(|iv| iv.lo).collect();
        let mut sorted = singles.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (1..=n).collect::<Vec<_>>());
        let last_multi = intervals.iter().rposition(|iv| iv.len() > 1).map_or(0, |p| p + 1);
        prop_assert!(intervals[last_multi..].windows(2).all(|w| w[0].lo < w[1].lo));
        // Geometric bound: sum_k ceil(n / lambda^k) <= n / (lambda - 1) + levels.
        let levels = ((n as f64).ln() / lambda.ln()).ceil().max(1.0);
        let bound = n as f64 / (lambda - 1.0) + levels + n as f64;
        prop_assert!((intervals.len() as f64) <= bound);
    }

    #[test]
    fn all_intervals_membership_implies_dyadic_membership(
        ys in prop::collection::vec(-3.0f64..3.0, 2..40),
        tau in 0.1f64..3.0,
    ) {
        let n = ys.len();
        let t: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        let s = Sample::from_columns("s", t, ys).unwrap();
        let g = vec![0.0; n];
        let all = RegionSpec::new(IntervalScheme::all(), 1.0, Threshold::Tau(tau)).unwrap();
        let dyadic = RegionSpec::new(IntervalScheme::dyadic(), 1.0, Threshold::Tau(tau)).unwrap();
        if membership(&g, &s, &all).unwrap().is_member {
            prop_assert!(membership(&g, &s, &dyadic).unwrap().is_member);
        }
    }

    #[test]
    fn honest_scale_dominates_median(ys in prop::collection::vec(-5.0f64..5.0, 100..300), shift in -50.0f64..50.0) {
        let n = ys.len();
        let t: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        let s = Sample::from_columns("s", t, ys.clone()).unwrap();
        let shifted = s.with_y(ys.iter().map(|v| v + shift).collect()).unwrap();
        let med = sigma_median(&s).unwrap().value;
        prop_assert!(sigma_honest(&s).unwrap().value >= med);
        let moved = sigma_median(&shifted).unwrap().value;
        prop_assert!((moved - med).abs() <= 1e-12 * (1.0 + shift.abs()) * med.max(1.0));
    }
}

fn noise_sample(seed: u64, n: usize, sigma: f64) -> Sample {
    let mut rng = stream_rng(seed, &[31], 0);
    let t: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
    let y = (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
    Sample::from_columns("noise", t, y).unwrap()
}

#[test]
fn median_scale_is_consistent() {
    // The estimator's relative sd at n = 1e4 is about 1.1%, so 3% is
    // roughly a 2.7-sigma band.
    const REL_TOL: f64 = 0.03;
    for seed in 0..5 {
        let est = sigma_median(&noise_sample(seed, 10_000, 2.5)).unwrap().value;
        assert!((est / 2.5 - 1.0).abs() <= REL_TOL, "seed {seed}: {est}");
    }
}

#[test]
fn honest_scale_rarely_underestimates() {
    const SEEDS: u64 = 400;
    const MIN_FREQUENCY: f64 = 0.99;
    let hits = (0..SEEDS)
        .filter(|&seed| sigma_honest(&noise_sample(seed, 10_000, 1.0)).unwrap().value >= 1.0)
        .count();
    let freq = hits as f64 / SEEDS as f64;
    assert!(freq >= MIN_FREQUENCY, "{freq}");
}
