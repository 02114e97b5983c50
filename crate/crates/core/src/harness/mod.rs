//! Experiment engine: config parsing, test-function families, the seven
//! experiments, and report serialization.

pub mod dsl;
pub mod experiments;
pub mod families;
pub mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GridError;
use crate::lorentz::LorentzError;
use crate::operators::OperatorError;
use crate::weights::WeightError;

pub use dsl::{parse_config, parse_spec, parse_weight, InequalitySpec, ParseError, ParseErrorKind};
pub use experiments::{family_inputs, run, run_with, ClassReading, EnvelopeFit, ExperimentReport, GridLevel, ReportRow, Summary};
pub use families::{FamilyKind, FamilySpec, TestFunction};
pub use report::{write_report, ROWS_FILE, SUMMARY_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExperimentId {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
    E7,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 7] = [Self::E1, Self::E2, Self::E3, Self::E4, Self::E5, Self::E6, Self::E7];

    pub fn name(self) -> &'static str {
        match self {
            Self::E1 => "e1",
            Self::E2 => "e2",
            Self::E3 => "e3",
            Self::E4 => "e4",
            Self::E5 => "e5",
            Self::E6 => "e6",
            Self::E7 => "e7",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Self::E1 => "Hilbert product H f1 * H f2 into weak L^p of the product weight",
            Self::E2 => "maximal product M f1 * M f2 into weak L^p of the product weight",
            Self::E3 => "extrapolation pairs (S_T f, M f) and the A_inf hypothesis behind them",
            Self::E4 => "mixed weak-type bounds for M f / v and S_T f / v",
            Self::E5 => "bilinear multiplier of a BV symbol at the L^1 x L^1 endpoint",
            Self::E6 => "bilinear multiplier of a BV symbol on Lorentz spaces",
            Self::E7 => "level-set chain through the sharp operators S_T1 f1 * S_T2 f2",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Lorentz(#[from] LorentzError),
    #[error("{0}")]
    Spec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
