//! Weight and function expressions of the configuration language, and their
//! evaluation on a grid. Parsing lives in the harness.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{hat_aq2_build, Weight, WeightError};
use crate::grid::{Extension, Grid, RealFunction};

#[derive(Debug, Clone, PartialEq)]
pub enum FuncExpr {
    /// `chi_[a, b)`.
    Indicator(f64, f64),
    /// Smooth bump of unit height centered at `c` with radius `r`.
    Bump(f64, f64),
    /// `count` equal pieces over the inner window with seeded values in `[0, 1)`.
    Step { seed: u64, count: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightExpr {
    One,
    Power(f64),
    A1Max(FuncExpr, f64),
    HatQ2 { u0: Box<WeightExpr>, h1: FuncExpr, h2: FuncExpr, alpha: f64, q: f64 },
    Mul(Box<WeightExpr>, Box<WeightExpr>),
    Pow(Box<WeightExpr>, f64),
}

pub fn bump(x: f64, c: f64, r: f64) -> f64 {
    let t = (x - c) / r;
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

impl FuncExpr {
    pub fn validate(&self) -> Result<(), WeightError> {
        match *self {
            Self::Indicator(a, b) if !(a.is_finite() && b.is_finite() && a < b) => {
                Err(WeightError::Function(format!("indicator({a}, {b}) needs a < b")))
            }
            Self::Bump(c, r) if !(c.is_finite() && r.is_finite() && r > 0.0) => {
                Err(WeightError::Function(format!("bump({c}, {r}) needs a positive radius")))
            }
            Self::Step { count: 0, .. } => Err(WeightError::Function("step needs at least one piece".into())),
            _ => Ok(()),
        }
    }

    pub fn evaluate(&self, grid: Grid) -> Result<RealFunction, WeightError> {
        self.validate()?;
        Ok(match *self {
            Self::Indicator(a, b) => RealFunction::indicator(grid, a, b),
            Self::Bump(c, r) => RealFunction::from_fn(grid, Extension::ZeroPadded, |x| bump(x, c, r)),
            Self::Step { seed, count } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let values: Vec<f64> = (0..count).map(|_| rng.gen::<f64>()).collect();
                let half = grid.half_length() / 2.0;
                let width = 2.0 * half / count as f64;
                RealFunction::from_fn(grid, Extension::ZeroPadded, |x| {
                    if x < -half || x >= half {
                        0.0
                    } else {
                        values[(((x + half) / width) as usize).min(count - 1)]
                    }
                })
            }
        })
    }
}

impl WeightExpr {
    pub fn evaluate(&self, grid: Grid) -> Result<Weight, WeightError> {
        match self {
            Self::One => Ok(Weight::one(grid)),
            Self::Power(a) => Weight::power(*a, grid),
            Self::A1Max(h, b) => Weight::maximal_power(&h.evaluate(grid)?, *b),
            Self::HatQ2 { u0, h1, h2, alpha, q } => {
                hat_aq2_build(&u0.evaluate(grid)?, &h1.evaluate(grid)?, &h2.evaluate(grid)?, *alpha, *q)
            }
            Self::Mul(a, b) => a.evaluate(grid)?.product(&b.evaluate(grid)?),
            Self::Pow(w, c) => w.evaluate(grid)?.pow(*c),
        }
    }
}

impl fmt::Display for FuncExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Indicator(a, b) => write!(f, "indicator({a:?},{b:?})"),
            Self::Bump(c, r) => write!(f, "bump({c:?},{r:?})"),
            Self::Step { seed, count } => write!(f, "step({seed},{count})"),
        }
    }
}

impl fmt::Display for WeightExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::One => write!(f, "one"),
            Self::Power(a) => write!(f, "power({a:?})"),
            Self::A1Max(h, b) => write!(f, "a1max({h},{b:?})"),
            Self::HatQ2 { u0, h1, h2, alpha, q } => write!(f, "hatq2({u0},{h1},{h2},{alpha:?},{q:?})"),
            Self::Mul(a, b) => write!(f, "({a})*({b})"),
            Self::Pow(w, c) => write!(f, "({w})^{c:?}"),
        }
    }
}
