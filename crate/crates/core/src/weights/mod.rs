//! Weights, their provenance, and estimators for the usual weight constants.

pub mod constants;
pub mod expr;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::grid::{Extension, Grid, RealFunction};
use crate::operators::maximal_cells;

pub use constants::{
    a1_constant, ap_constant, apr_constant, fujii_wilson, rh1_bound, rh_inf_constant, ScanOptions,
};
pub use expr::{FuncExpr, WeightExpr};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("weight must be positive and finite, cell {index} holds {value}")]
    NotPositive { index: usize, value: f64 },
    #[error("power weight |x|^{0} is not locally integrable (need a > -1)")]
    NotLocallyIntegrable(f64),
    #[error("exponent {name} = {value} is out of range ({expected})")]
    Exponent { name: &'static str, value: f64, expected: &'static str },
    #[error("1/p = 1/p1 + 1/p2 fails: p1 = {p1}, p2 = {p2}, p = {p}")]
    ExponentRelation { p1: f64, p2: f64, p: f64 },
    #[error("function {0} vanishes identically")]
    ZeroFunction(&'static str),
    #[error("u0 has no A1 certificate from its construction")]
    NotA1,
    #[error("weight has no stored factorization into an A1 and an RH-infinity part")]
    NoFactorization,
    #[error("weights live on different grids")]
    GridMismatch,
    #[error("function expression: {0}")]
    Function(String),
}

/// How a weight was built. Constants that depend on a factorization read it from here.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    One,
    Power(f64),
    Explicit,
    /// `(Mh)^b`.
    MaximalPower { h: RealFunction, b: f64 },
    /// `u0 (Mh1)^{alpha (1-q)} (Mh2)^{(1-alpha)(1-q)}`.
    HatComposite { u0: Box<Weight>, h1: RealFunction, h2: RealFunction, alpha: f64, q: f64 },
    Product(Box<Weight>, Box<Weight>),
    Pow(Box<Weight>, f64),
}

/// Certified constant key for `hat_aq2_build` results.
pub const HAT_AQ2: &str = "hat_aq2";

/// A strictly positive sampled function with provenance and certified bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    function: RealFunction,
    provenance: Provenance,
    certified: BTreeMap<String, f64>,
}

fn check_positive(f: &RealFunction) -> Result<(), WeightError> {
    match f.samples().iter().position(|&v| !(v.is_finite() && v > 0.0)) {
        Some(index) => Err(WeightError::NotPositive { index, value: f.samples()[index] }),
        None => Ok(()),
    }
}

impl Weight {
    pub fn explicit(function: RealFunction) -> Result<Self, WeightError> {
        check_positive(&function)?;
        Ok(Self { function, provenance: Provenance::Explicit, certified: BTreeMap::new() })
    }

    fn built(function: RealFunction, provenance: Provenance) -> Result<Self, WeightError> {
        check_positive(&function)?;
        Ok(Self { function, provenance, certified: BTreeMap::new() })
    }

    pub fn one(grid: Grid) -> Self {
        Self {
            function: RealFunction::constant(grid, 1.0, Extension::ZeroPadded),
            provenance: Provenance::One,
            certified: BTreeMap::new(),
        }
    }

    /// `max(|x|, h/2)^a` at cell centers; the floor keeps the origin cell finite.
    pub fn power(a: f64, grid: Grid) -> Result<Self, WeightError> {
        if !(a.is_finite() && a > -1.0) {
            return Err(WeightError::NotLocallyIntegrable(a));
        }
        let floor = 0.5 * grid.spacing();
        let f = RealFunction::from_fn(grid, Extension::ZeroPadded, |x| x.abs().max(floor).powf(a));
        Self::built(f, Provenance::Power(a))
    }

    /// `(Mh)^b` with `M` in cell values.
    pub fn maximal_power(h: &RealFunction, b: f64) -> Result<Self, WeightError> {
        if !b.is_finite() {
            return Err(WeightError::Exponent { name: "b", value: b, expected: "finite" });
        }
        if h.is_zero() {
            return Err(WeightError::ZeroFunction("h"));
        }
        let m = maximal_cells(h);
        Self::built(m.map(|v| v.powf(b)), Provenance::MaximalPower { h: h.abs(), b })
    }

    pub fn product(&self, other: &Weight) -> Result<Self, WeightError> {
        let f = self.function.zip_with(&other.function, |a, b| a * b).map_err(|_| WeightError::GridMismatch)?;
        Self::built(f, Provenance::Product(Box::new(self.clone()), Box::new(other.clone())))
    }

    pub fn pow(&self, c: f64) -> Result<Self, WeightError> {
        if !c.is_finite() {
            return Err(WeightError::Exponent { name: "power", value: c, expected: "finite" });
        }
        Self::built(self.function.map(|v| v.powf(c)), Provenance::Pow(Box::new(self.clone()), c))
    }

    /// `c w` as an explicit weight; used to check scale invariance of constants.
    pub fn scaled(&self, c: f64) -> Result<Self, WeightError> {
        Self::explicit(self.function.scaled(c))
    }

    pub fn function(&self) -> &RealFunction {
        &self.function
    }

    pub fn samples(&self) -> &[f64] {
        self.function.samples()
    }

    pub fn grid(&self) -> &Grid {
        self.function.grid()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn certified(&self, name: &str) -> Option<f64> {
        self.certified.get(name).copied()
    }

    pub fn certified_constants(&self) -> &BTreeMap<String, f64> {
        &self.certified
    }

    pub fn with_certified(mut self, name: &str, value: f64) -> Self {
        self.certified.insert(name.to_string(), value);
        self
    }

    /// Whether the construction alone places the weight in `A_1`.
    pub fn is_a1_by_construction(&self) -> bool {
        match &self.provenance {
            Provenance::One => true,
            Provenance::Power(a) => *a <= 0.0,
            Provenance::MaximalPower { b, .. } => (0.0..1.0).contains(b),
            Provenance::Pow(w, c) => (0.0..=1.0).contains(c) && w.is_a1_by_construction(),
            Provenance::HatComposite { u0, q, .. } => *q == 1.0 && u0.is_a1_by_construction(),
            Provenance::Product(..) | Provenance::Explicit => false,
        }
    }

    /// `w = u v` with `u` meant to be `A_1` and `v` meant to be `RH_inf`, read off
    /// the construction.
    pub fn factorization(&self) -> Result<(RealFunction, RealFunction), WeightError> {
        let grid = *self.grid();
        let one = || RealFunction::constant(grid, 1.0, Extension::ZeroPadded);
        match &self.provenance {
            Provenance::One => Ok((one(), one())),
            Provenance::Power(a) if *a <= 0.0 => Ok((self.function.clone(), one())),
            Provenance::Power(_) => Ok((one(), self.function.clone())),
            Provenance::MaximalPower { b, .. } if (0.0..1.0).contains(b) => Ok((self.function.clone(), one())),
            Provenance::MaximalPower { b, .. } if *b < 0.0 => Ok((one(), self.function.clone())),
            Provenance::MaximalPower { .. } | Provenance::Explicit => Err(WeightError::NoFactorization),
            Provenance::HatComposite { u0, .. } => {
                let v = self.function.zip_with(u0.function(), |w, u| w / u).expect("same grid");
                Ok((u0.function.clone(), v))
            }
            Provenance::Product(a, b) => {
                let (ua, va) = a.factorization()?;
                let (ub, vb) = b.factorization()?;
                Ok((ua.zip_with(&ub, |x, y| x * y).expect("same grid"), va.zip_with(&vb, |x, y| x * y).expect("same grid")))
            }
            Provenance::Pow(w, c) => {
                let (u, v) = w.factorization()?;
                let (u, v) = (u.map(|x| x.powf(*c)), v.map(|x| x.powf(*c)));
                // inverting swaps the roles: 1/u is RH_inf when u is A_1
                Ok(if *c >= 0.0 { (u, v) } else { (v, u) })
            }
        }
    }

    /// Sum of the exponents `alpha_j` when the weight is `prod_j (M h_j)^{-alpha_j}`.
    pub fn maximal_decay_exponent(&self) -> Option<f64> {
        match &self.provenance {
            Provenance::One => Some(0.0),
            Provenance::MaximalPower { b, .. } if *b <= 0.0 => Some(-b),
            Provenance::Product(a, b) => Some(a.maximal_decay_exponent()? + b.maximal_decay_exponent()?),
            Provenance::Pow(w, c) if *c >= 0.0 => Some(w.maximal_decay_exponent()? * c),
            Provenance::HatComposite { u0, q, .. } if matches!(u0.provenance, Provenance::One) => Some(q - 1.0),
            _ => None,
        }
    }
}

impl AsRef<RealFunction> for Weight {
    fn as_ref(&self) -> &RealFunction {
        &self.function
    }
}

/// `u0 (Mh1)^{alpha(1-q)} (Mh2)^{(1-alpha)(1-q)}`, certified with `[u0]_{A_1}^{1/q}`.
pub fn hat_aq2_build(u0: &Weight, h1: &RealFunction, h2: &RealFunction, alpha: f64, q: f64) -> Result<Weight, WeightError> {
    if !u0.is_a1_by_construction() {
        return Err(WeightError::NotA1);
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(WeightError::Exponent { name: "alpha", value: alpha, expected: "0 <= alpha <= 1" });
    }
    if !(q.is_finite() && q >= 1.0) {
        return Err(WeightError::Exponent { name: "q", value: q, expected: "q >= 1" });
    }
    if h1.is_zero() {
        return Err(WeightError::ZeroFunction("h1"));
    }
    if h2.is_zero() {
        return Err(WeightError::ZeroFunction("h2"));
    }
    let (e1, e2) = (alpha * (1.0 - q), (1.0 - alpha) * (1.0 - q));
    let (m1, m2) = (maximal_cells(h1), maximal_cells(h2));
    let mut f = u0.function.clone();
    for (i, v) in f.samples_mut().iter_mut().enumerate() {
        // skip zero exponents so that q = 1 reproduces u0 bit for bit
        if e1 != 0.0 {
            *v *= m1.samples()[i].powf(e1);
        }
        if e2 != 0.0 {
            *v *= m2.samples()[i].powf(e2);
        }
    }
    let certificate = a1_constant(u0.function()).powf(1.0 / q);
    let provenance = Provenance::HatComposite { u0: Box::new(u0.clone()), h1: h1.abs(), h2: h2.abs(), alpha, q };
    Ok(Weight::built(f, provenance)?.with_certified(HAT_AQ2, certificate))
}

/// `(p1, p2; p)` with `1/p = 1/p1 + 1/p2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentTriple {
    pub p1: f64,
    pub p2: f64,
    pub p: f64,
}

impl ExponentTriple {
    pub fn new(p1: f64, p2: f64) -> Result<Self, WeightError> {
        for (name, v) in [("p1", p1), ("p2", p2)] {
            if !(v.is_finite() && v >= 1.0) {
                return Err(WeightError::Exponent { name, value: v, expected: ">= 1" });
            }
        }
        Ok(Self { p1, p2, p: 1.0 / (1.0 / p1 + 1.0 / p2) })
    }

    /// Checks a fully specified triple.
    pub fn with_p(p1: f64, p2: f64, p: f64) -> Result<Self, WeightError> {
        let t = Self::new(p1, p2)?;
        if !((1.0 / p - 1.0 / p1 - 1.0 / p2).abs() <= 1e-12) {
            return Err(WeightError::ExponentRelation { p1, p2, p });
        }
        Ok(t)
    }
}

impl fmt::Display for ExponentTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}; {})", self.p1, self.p2, self.p)
    }
}
