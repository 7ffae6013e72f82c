// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants carry enough context to print a useful message; [`Error::name`]
/// gives the stable identifier the CLI writes to standard error.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("duplicate design point t = {0}")]
    DuplicateDesignPoint(f64),
    #[error("design point t = {0} lies outside [0, 1]")]
    DesignPointOutOfRange(f64),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("scale must be positive, got {0}")]
    ScaleNotPositive(f64),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("interval [{lo}, {hi}] out of range for length {len}")]
    IndexOutOfRange { lo: usize, hi: usize, len: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("samples do not share the same design points")]
    SupportMismatch,
    #[error("no joint approximation: the merged interpolant violates the joint region")]
    NoJointApproximation,
    #[error("tube squeezing did not converge after {rounds} rounds ({violations} violating intervals remain)")]
    MaxRoundsExceeded { rounds: usize, violations: usize },
    #[error("infeasible tube: lower bound exceeds upper bound at index {0}")]
    InfeasibleTube(usize),
    #[error("interval fraction delta must lie in (0, 1], got {0}")]
    DeltaOutOfRange(f64),
    #[error("missing calibrated critical value for {0}")]
    MissingCalibration(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn name(&self) -> &'static str {
        match self {
            Error::EmptyInput => "EmptyInput",
            Error::DuplicateDesignPoint(_) => "DuplicateDesignPoint",
            Error::DesignPointOutOfRange(_) => "DesignPointOutOfRange",
            Error::NonFinite => "NonFinite",
            Error::ScaleNotPositive(_) => "ScaleNotPositive",
            Error::TooFewPoints { .. } => "TooFewPoints",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::SupportMismatch => "SupportMismatch",
            Error::NoJointApproximation => "NoJointApproximation",
            Error::MaxRoundsExceeded { .. } => "MaxRoundsExceeded",
            Error::InfeasibleTube(_) => "InfeasibleTube",
            Error::DeltaOutOfRange(_) => "DeltaOutOfRange",
            Error::MissingCalibration(_) => "MissingCalibration",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::Csv(_) => "Csv",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
