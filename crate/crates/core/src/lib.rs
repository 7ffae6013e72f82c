// SPDX-License-Identifier: Apache-2.0

//! Joint approximation of several nonparametric regression samples.
//!
//! A sample's approximation region is the set of functions whose residuals
//! look like noise on every interval of a multiresolution scheme. Several
//! samples admit a common regression function when their regions intersect.
//! The crate provides the regions and their Monte Carlo calibration, a
//! taut-string fit that finds a member of the intersection with few local
//! extremes, and two-sample equivalence tests with a power-study harness.
//!
//! Replication loops run on rayon when the `parallel` feature is enabled
//! (the default); results are bit-identical either way.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod calibration;
pub mod data;
pub mod error;
pub mod intervals;
pub mod io;
pub mod joint;
pub mod par;
pub mod region;
pub mod rng;
pub mod scale;
pub mod sim;
pub mod taut;
pub mod two_sample;

pub use calibration::{calibrate, CalibrationRequest, CalibrationResult, Target};
pub use data::{merge_samples, MergedGrid, Sample};
pub use error::{Error, Result};
pub use intervals::{IndexInterval, IntervalScheme};
pub use joint::{adjust_level, joint_contains, joint_region_empty, JointRegionSpec};
pub use par::Execution;
pub use region::{membership, region_contains, region_contains_star, MembershipReport, RegionSpec, Threshold};
pub use scale::{sigma_honest, sigma_median, ScaleEstimate};
pub use taut::{joint_taut_fit, taut_string_solve, FitConfig, TautStringFit, Tube};
pub use two_sample::{an_two_sample_test, delgado_test, detection_bound, fanlin_test, Method, TestOutcome};
