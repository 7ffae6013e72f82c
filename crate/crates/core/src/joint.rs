// SPDX-License-Identifier: Apache-2.0

//! Joint regions of several samples: each sample gets its own region at the
//! adjusted level `alpha^(1/k)`, and a function on the merged grid is a joint
//! member when its restriction to every sample is a member.

use serde::{Deserialize, Serialize};

use crate::cache::CalibrationCache;
use crate::calibration::{calibrate_with, CalibrationRequest, Target};
use crate::data::{merge_samples, support_relation, GridIndex, Sample, SupportRelation};
use crate::error::{Error, Result};
use crate::intervals::IntervalScheme;
use crate::par::Execution;
use crate::region::{membership, MembershipReport, RegionSpec, Threshold};
use crate::scale::sigma_median;

/// Per-sample level giving overall level `alpha` for `k` independent
/// samples.
pub fn adjust_level(alpha: f64, k: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if k == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(alpha.powf(1.0 / k as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKind {
    Tau,
    Gamma,
}

impl ThresholdKind {
    pub fn with_value(self, value: f64) -> Threshold {
        match self {
            ThresholdKind::Tau => Threshold::Tau(value),
            ThresholdKind::Gamma => Threshold::Gamma(value),
        }
    }

    fn single_target(self) -> Target {
        match self {
            ThresholdKind::Tau => Target::TauSingle,
            ThresholdKind::Gamma => Target::GammaSingle,
        }
    }
}

/// How thresholds are simulated when building a calibrated joint spec.
#[derive(Debug, Clone)]
pub struct CalibrationSettings {
    pub replications: usize,
    pub seed: u64,
    pub exec: Execution,
    pub cache: Option<CalibrationCache>,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        CalibrationSettings {
            replications: crate::calibration::DEFAULT_REPLICATIONS,
            seed: crate::calibration::DEFAULT_SEED,
            exec: Execution::Auto,
            cache: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointRegionSpec {
    specs: Vec<RegionSpec>,
    alpha: f64,
    alpha_k: f64,
}

impl JointRegionSpec {
    pub fn new(specs: Vec<RegionSpec>, alpha: f64) -> Result<Self> {
        let alpha_k = adjust_level(alpha, specs.len())?;
        if specs.windows(2).any(|w| !w[0].threshold.same_kind(&w[1].threshold)) {
            return Err(Error::InvalidParameter(
                "all samples must use the same threshold kind".into(),
            ));
        }
        Ok(JointRegionSpec {
            specs,
            alpha,
            alpha_k,
        })
    }

    /// Every sample uses its own median-difference scale and the same
    /// `threshold`.
    pub fn with_threshold(
        samples: &[Sample],
        scheme: IntervalScheme,
        alpha: f64,
        threshold: Threshold,
    ) -> Result<Self> {
        let specs = samples
            .iter()
            .map(|s| RegionSpec::new(scheme, sigma_median(s)?.value, threshold))
            .collect::<Result<Vec<_>>>()?;
        Self::new(specs, alpha)
    }

    /// Every sample uses its own median-difference scale and a threshold
    /// simulated at its own size and the adjusted level.
    pub fn calibrated(
        samples: &[Sample],
        scheme: IntervalScheme,
        alpha: f64,
        kind: ThresholdKind,
        settings: &CalibrationSettings,
    ) -> Result<Self> {
        let alpha_k = adjust_level(alpha, samples.len())?;
        let specs = samples
            .iter()
            .map(|s| {
                let req = CalibrationRequest::new(kind.single_target(), s.len(), alpha_k)
                    .with_scheme(scheme)
                    .with_replications(settings.replications)
                    .with_seed(settings.seed);
                let result = match &settings.cache {
                    Some(cache) => cache.get_or_calibrate(&req, settings.exec)?,
                    None => calibrate_with(&req, settings.exec)?,
                };
                RegionSpec::new(scheme, sigma_median(s)?.value, kind.with_value(result.threshold))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(specs, alpha)
    }

    pub fn k(&self) -> usize {
        self.specs.len()
    }

    pub fn specs(&self) -> &[RegionSpec] {
        &self.specs
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn alpha_k(&self) -> f64 {
        self.alpha_k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointMembership {
    pub is_member: bool,
    pub per_sample: Vec<MembershipReport>,
}

fn check_count(samples: &[Sample], spec: &JointRegionSpec) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if samples.len() != spec.k() {
        return Err(Error::LengthMismatch {
            expected: spec.k(),
            got: samples.len(),
        });
    }
    Ok(())
}

/// Membership of `g`, given on the merged grid of `samples`, in the joint
/// region.
pub fn joint_contains(
    g: &[f64],
    samples: &[Sample],
    spec: &JointRegionSpec,
) -> Result<JointMembership> {
    check_count(samples, spec)?;
    let index = GridIndex::new(samples);
    if g.len() != index.len() {
        return Err(Error::LengthMismatch {
            expected: index.len(),
            got: g.len(),
        });
    }
    let per_sample = samples
        .iter()
        .zip(spec.specs())
        .enumerate()
        .map(|(i, (s, rs))| membership(&index.restrict(g, i), s, rs))
        .collect::<Result<Vec<_>>>()?;
    Ok(JointMembership {
        is_member: per_sample.iter().all(|r| r.is_member),
        per_sample,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emptiness {
    /// The merged interpolant is a joint member.
    NonEmpty,
    /// Equal supports and the interpolant fails: no joint approximation.
    NoJointApproximation,
    /// Overlapping but unequal supports and the interpolant fails; this
    /// does not by itself prove the region empty.
    InterpolantInfeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmptinessReport {
    pub verdict: Emptiness,
    /// True unless the interpolant is a joint member.
    pub empty: bool,
    pub supports: SupportRelation,
    /// The precision-weighted merged interpolant on the merged grid.
    pub witness: Vec<f64>,
    pub membership: JointMembership,
}

/// Tests the precision-weighted merged interpolant for joint membership.
/// Disjoint supports always pass, since every residual is zero.
pub fn joint_region_empty(samples: &[Sample], spec: &JointRegionSpec) -> Result<EmptinessReport> {
    check_count(samples, spec)?;
    let sigmas: Vec<f64> = spec.specs().iter().map(|s| s.sigma).collect();
    let merged = merge_samples(samples, &sigmas)?;
    let membership = joint_contains(&merged.y, samples, spec)?;
    let supports = support_relation(samples);
    let verdict = match (membership.is_member, supports) {
        (true, _) => Emptiness::NonEmpty,
        (false, SupportRelation::Overlapping) => Emptiness::InterpolantInfeasible,
        (false, _) => Emptiness::NoJointApproximation,
    };
    Ok(EmptinessReport {
        verdict,
        empty: verdict != Emptiness::NonEmpty,
        supports,
        witness: merged.y,
        membership,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample(label: &str, t: Vec<f64>, y: Vec<f64>) -> Sample {
        Sample::from_columns(label, t, y).unwrap()
    }

    fn grid(n: usize) -> Vec<f64> {
        (1..=n).map(|i| i as f64 / n as f64).collect()
    }

    fn tau_spec(k: usize, sigma: f64, tau: f64) -> JointRegionSpec {
        let rs = RegionSpec::new(IntervalScheme::dyadic(), sigma, Threshold::Tau(tau)).unwrap();
        JointRegionSpec::new(vec![rs; k], 0.95).unwrap()
    }

    #[test]
    fn level_adjustment() {
        assert_eq!(format!("{:.4}", adjust_level(0.95, 2).unwrap()), "0.9747");
        assert_eq!(adjust_level(0.9, 1).unwrap(), 0.9);
        assert_relative_eq!(adjust_level(0.95, 4).unwrap(), 0.98726, epsilon = 1e-5);
        assert!(adjust_level(1.0, 2).is_err());
        assert!(adjust_level(0.5, 0).is_err());
        let spec = tau_spec(3, 1.0, 2.0);
        assert_eq!(spec.alpha_k(), 0.95f64.powf(1.0 / 3.0));
    }

    #[test]
    fn single_sample_matches_region() {
        let y = vec![0.1, 0.5, -0.2, 0.3, 0.0, 0.4];
        let s = sample("a", grid(6), y.clone());
        let spec = tau_spec(1, 0.3, 1.0);
        let g = vec![0.1; 6];
        let joint = joint_contains(&g, std::slice::from_ref(&s), &spec).unwrap();
        let direct = membership(&g, &s, &spec.specs()[0]).unwrap();
        assert_eq!(joint.per_sample[0], direct);
        assert_eq!(joint.is_member, direct.is_member);
    }

    #[test]
    fn mean_of_equal_supports_with_huge_tau() {
        let a = sample("a", grid(8), vec![0.0, 1.0, 0.5, 0.2, 0.9, 0.1, 0.3, 0.4]);
        let b = sample("b", grid(8), vec![0.3, 0.8, 0.1, 0.6, 0.2, 0.7, 0.0, 0.5]);
        let g: Vec<f64> = a.y().iter().zip(b.y()).map(|(u, v)| (u + v) / 2.0).collect();
        let spec = tau_spec(2, 0.5, 1e6);
        assert!(joint_contains(&g, &[a, b], &spec).unwrap().is_member);
    }

    #[test]
    fn disjoint_supports_never_empty() {
        let a = sample("a", vec![0.1, 0.3, 0.5], vec![0.0, 100.0, -5.0]);
        let b = sample("b", vec![0.2, 0.4, 0.6], vec![9.0, -9.0, 9.0]);
        let spec = tau_spec(2, 0.01, 0.01);
        let rep = joint_region_empty(&[a, b], &spec).unwrap();
        assert_eq!(rep.verdict, Emptiness::NonEmpty);
        assert!(!rep.empty);
        assert_eq!(rep.supports, SupportRelation::Disjoint);
        assert_eq!(rep.witness, vec![0.0, 9.0, 100.0, -9.0, -5.0, 9.0]);
    }

    #[test]
    fn far_apart_equal_supports_are_empty() {
        let n = 32;
        let a = sample("a", grid(n), (0..n).map(|i| (i % 2) as f64 * 0.1).collect());
        let b = sample("b", grid(n), (0..n).map(|i| 5.0 + (i % 3) as f64 * 0.1).collect());
        let spec = JointRegionSpec::with_threshold(
            &[a.clone(), b.clone()],
            IntervalScheme::dyadic(),
            0.95,
            Threshold::Tau(3.0),
        )
        .unwrap();
        let rep = joint_region_empty(&[a, b], &spec).unwrap();
        assert_eq!(rep.verdict, Emptiness::NoJointApproximation);
        assert!(rep.empty);
    }

    #[test]
    fn overlapping_supports_report_interpolant_only() {
        let a = sample("a", vec![0.1, 0.2, 0.3, 0.4], vec![0.0, 0.0, 0.0, 0.0]);
        let b = sample("b", vec![0.2, 0.3, 0.5, 0.6], vec![50.0, 50.0, 50.0, 50.0]);
        let rep = joint_region_empty(&[a, b], &tau_spec(2, 0.1, 1.0)).unwrap();
        assert_eq!(rep.verdict, Emptiness::InterpolantInfeasible);
        assert_eq!(rep.supports, SupportRelation::Overlapping);
    }

    #[test]
    fn single_sample_never_empty() {
        let a = sample("a", grid(5), vec![3.0, -1.0, 4.0, 1.0, -5.0]);
        assert!(!joint_region_empty(&[a], &tau_spec(1, 0.1, 0.01)).unwrap().empty);
    }

    #[test]
    fn length_checks() {
        let a = sample("a", grid(4), vec![0.0; 4]);
        let spec = tau_spec(1, 1.0, 1.0);
        assert!(matches!(
            joint_contains(&[0.0; 3], std::slice::from_ref(&a), &spec),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            joint_contains(&[0.0; 4], &[a.clone(), a], &spec),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
