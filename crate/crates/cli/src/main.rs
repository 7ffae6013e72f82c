// SPDX-License-Identifier: Apache-2.0

//! `jointapprox` command-line interface.
//!
//! Exit status: 0 on success, 2 on usage errors, 1 on domain errors (the
//! library error name is printed to standard error).

mod commands;
mod manifest;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jointapprox::intervals::IntervalScheme;
use jointapprox::sim::GShape;
use jointapprox::two_sample::{BoundKind, Method};
use jointapprox::calibration::Target;

#[derive(Parser, Debug)]
#[command(name = "jointapprox", version, about = "Joint approximation of several regression samples")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Directory receiving results and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads for Monte Carlo work; defaults to all cores.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    /// Interval scheme: `all` or `multi:<lambda>`, optionally `-nosingletons`.
    #[arg(long, global = true, default_value = "multi:2", value_parser = parse_scheme)]
    pub scheme: IntervalScheme,
    /// Map each sample's design points affinely onto [0, 1].
    #[arg(long, global = true)]
    pub rescale: bool,
    /// Also write an SVG plot where the subcommand has one.
    #[arg(long, global = true)]
    pub plot: bool,
    /// Compute calibrations without reading or writing the cache.
    #[arg(long, global = true)]
    pub no_cache: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Noise scale estimates of each sample.
    Sigma {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Monte Carlo threshold or critical value.
    Calibrate {
        #[arg(long, value_parser = parse_target)]
        target: Target,
        #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
        n: u64,
        #[arg(long, value_parser = parse_level)]
        alpha: f64,
        #[command(flatten)]
        mc: MonteCarlo,
    },
    /// Is the intersection of the per-sample regions empty?
    Jointcheck {
        #[command(flatten)]
        region: RegionArgs,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Joint taut-string fit of k samples.
    Jointfit {
        #[command(flatten)]
        region: RegionArgs,
        /// Factor applied to the tube half-width at squeezed gates.
        #[arg(long, default_value_t = 0.5, value_parser = parse_open_unit)]
        squeeze: f64,
        #[arg(long, default_value_t = 200)]
        max_rounds: usize,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Two-sample test on a common design.
    Test {
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[arg(long, value_parser = parse_level)]
        alpha: f64,
        /// Use this critical value (or threshold) instead of calibrating.
        #[arg(long)]
        critical: Option<f64>,
        #[command(flatten)]
        mc: MonteCarlo,
        first: PathBuf,
        second: PathBuf,
    },
    /// Power of the four tests on the simulation scenarios.
    Power {
        /// Scenario numbers, 1 to 4.
        #[arg(long, value_delimiter = ',', required = true, value_parser = parse_shape)]
        g: Vec<GShape>,
        #[arg(long, value_delimiter = ',', required = true)]
        etas: Vec<f64>,
        #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(2..))]
        n: u64,
        /// Test level; the size is `1 - alpha`.
        #[arg(long, default_value_t = 0.95, value_parser = parse_level)]
        alpha: f64,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        reps: u64,
        #[arg(long, default_value_t = jointapprox::calibration::DEFAULT_SEED)]
        seed: u64,
        /// Replications for the critical values.
        #[arg(long, default_value_t = jointapprox::calibration::DEFAULT_REPLICATIONS as u64,
              value_parser = clap::value_parser!(u64).range(100..))]
        cal_reps: u64,
    },
    /// Smallest detectable local deviation.
    Bounds {
        #[arg(long, value_parser = parse_bound_kind)]
        kind: BoundKind,
        #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
        n: u64,
        #[arg(long)]
        sigma1: f64,
        #[arg(long)]
        sigma2: f64,
        /// Fraction of the design covered by the deviation.
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct MonteCarlo {
    #[arg(long, default_value_t = jointapprox::calibration::DEFAULT_REPLICATIONS as u64,
          value_parser = clap::value_parser!(u64).range(100..))]
    pub reps: u64,
    #[arg(long, default_value_t = jointapprox::calibration::DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Tau,
    Gamma,
}

#[derive(Args, Debug, Clone)]
pub struct RegionArgs {
    /// Joint level; each sample uses `alpha^(1/k)`.
    #[arg(long, default_value_t = 0.95, value_parser = parse_level)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = Kind::Tau)]
    pub kind: Kind,
    /// Use this tau (or gamma) for every sample instead of calibrating.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Use the honest order-statistic scale instead of the median one.
    #[arg(long)]
    pub honest: bool,
    #[command(flatten)]
    pub mc: MonteCarlo,
}

fn parse_scheme(s: &str) -> Result<IntervalScheme, String> {
    s.parse().map_err(|e: jointapprox::Error| e.to_string())
}

fn parse_target(s: &str) -> Result<Target, String> {
    s.parse().map_err(|e: jointapprox::Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: jointapprox::Error| e.to_string())
}

fn parse_bound_kind(s: &str) -> Result<BoundKind, String> {
    s.parse().map_err(|e: jointapprox::Error| e.to_string())
}

fn parse_shape(s: &str) -> Result<GShape, String> {
    let id = if s.starts_with('g') { s.to_string() } else { format!("g{s}") };
    id.parse().map_err(|e: jointapprox::Error| e.to_string())
}

fn parse_open_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not in (0, 1)"))
    }
}

fn parse_level(s: &str) -> Result<f64, String> {
    parse_open_unit(s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads as usize)
            .build_global()
        {
            eprintln!("error: Io: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if let Some(usage) = err.downcast_ref::<commands::UsageError>() {
                eprintln!("error: {usage}");
                return ExitCode::from(2);
            }
            match err.downcast_ref::<jointapprox::Error>() {
                Some(domain) => eprintln!("error: {}: {domain}", domain.name()),
                None => eprintln!("error: Io: {err:#}"),
            }
            ExitCode::from(1)
        }
    }
}
