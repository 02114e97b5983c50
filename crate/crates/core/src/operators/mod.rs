//! Linear and sublinear operators on sampled functions.

pub mod hilbert;
pub mod maximal;
pub mod multiplier;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridError, RealFunction};

pub use hilbert::{bilinear_hts, hilbert, modulated_hilbert, HilbertBackend};
pub use maximal::{maximal, maximal_cells};
pub use multiplier::{bv_multiplier, direct_multiplier, Atom, AtomicMeasure, BvProduct, Symbol};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("functions live on different grids")]
    GridMismatch,
    #[error("direct multiplier needs periodic input")]
    NotPeriodic,
    #[error("{active} active frequencies exceed the direct-sum budget of {budget}")]
    BandBudget { active: usize, budget: usize },
    #[error("measure atoms must be finite")]
    NonFiniteMeasure,
    #[error("measure has zero total mass and cannot be normalized")]
    ZeroMass,
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
}

/// The operators an experiment may name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorHandle {
    Id,
    Hilbert,
    Maximal,
    SharpHilbert,
    SharpId,
}

impl OperatorHandle {
    pub const ALL: [OperatorHandle; 5] = [Self::Id, Self::Hilbert, Self::Maximal, Self::SharpHilbert, Self::SharpId];

    /// Applies the operator. Hilbert uses the backend natural for the input's
    /// extension; the maximal operator returns cell values (see [`maximal_cells`]).
    pub fn apply(self, f: &RealFunction) -> RealFunction {
        let backend = HilbertBackend::natural_for(f.extension());
        match self {
            Self::Id => f.clone(),
            Self::Hilbert => hilbert(f, backend),
            Self::Maximal => maximal_cells(f),
            Self::SharpHilbert => sharp_s(f, Self::Hilbert),
            Self::SharpId => sharp_s(f, Self::Id),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Id => "id",
            Self::Hilbert => "hilbert",
            Self::Maximal => "maximal",
            Self::SharpHilbert => "sharp_hilbert",
            Self::SharpId => "sharp_id",
        }
    }
}

impl fmt::Display for OperatorHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorHandle {
    type Err = OperatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "id" | "identity" => Self::Id,
            "h" | "hilbert" => Self::Hilbert,
            "m" | "maximal" => Self::Maximal,
            "sh" | "s_h" | "sharp_hilbert" => Self::SharpHilbert,
            "sid" | "s_id" | "sharp_id" => Self::SharpId,
            _ => return Err(OperatorError::UnknownOperator(s.to_string())),
        })
    }
}

/// `S_T f = (M |Tf|^{1/2})^2` in cell values. The result is capped by `M|Tf|`,
/// which it never exceeds in exact arithmetic, so rounding cannot break that order.
pub fn sharp_s(f: &RealFunction, t: OperatorHandle) -> RealFunction {
    let tf = t.apply(f).abs();
    let root = maximal_cells(&tf.map(f64::sqrt));
    let full = maximal_cells(&tf);
    root.zip_with(&full, |r, m| (r * r).min(m)).expect("same grid")
}

/// `(T1 f1)(T2 f2)`.
pub fn product_op(t1: OperatorHandle, t2: OperatorHandle, f1: &RealFunction, f2: &RealFunction) -> Result<RealFunction, OperatorError> {
    if f1.grid() != f2.grid() {
        return Err(OperatorError::GridMismatch);
    }
    let a = t1.apply(f1);
    let b = t2.apply(f2);
    Ok(a.zip_with(&b, |x, y| x * y)?)
}
