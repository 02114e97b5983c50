//! Bilinear multipliers: the bounded-variation form `B_m = sum_j mu_j H_{t_j, s_j}`
//! and the direct double Fourier sum used to check it.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use super::hilbert::{bilinear_hts, HilbertBackend};
use super::OperatorError;
use crate::grid::{inverse_spectral_transform, spectral_transform, ComplexFunction, Extension, Sample, SampledFunction, Spectrum};

/// Above this size `direct_multiplier` insists on band-limited input.
pub const DIRECT_FULL_LIMIT: usize = 1 << 12;
pub const DIRECT_BAND_BUDGET: usize = 256;
/// Coefficients below this fraction of the largest one count as inactive.
const ACTIVE_THRESHOLD: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub t: f64,
    pub s: f64,
    pub mu: Complex64,
}

/// Finite combination of point masses on the frequency plane.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
    normalized: bool,
}

impl AtomicMeasure {
    pub fn new(atoms: Vec<Atom>) -> Result<Self, OperatorError> {
        if atoms.iter().any(|a| !(a.t.is_finite() && a.s.is_finite() && a.mu.re.is_finite() && a.mu.im.is_finite())) {
            return Err(OperatorError::NonFiniteMeasure);
        }
        Ok(Self { atoms, normalized: false })
    }

    pub fn dirac(t: f64, s: f64) -> Self {
        Self { atoms: vec![Atom { t, s, mu: Complex64::new(1.0, 0.0) }], normalized: true }
    }

    /// Rescale to total mass one.
    pub fn normalized(mut self) -> Result<Self, OperatorError> {
        let total = self.total_mass();
        if total.norm() == 0.0 {
            return Err(OperatorError::ZeroMass);
        }
        for a in &mut self.atoms {
            a.mu /= total;
        }
        self.normalized = true;
        Ok(self)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn total_mass(&self) -> Complex64 {
        self.atoms.iter().map(|a| a.mu).sum()
    }

    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|a| a.mu.norm()).sum()
    }

    /// `m(xi, eta) = sum_j mu_j theta(xi - t_j) theta(eta - s_j)` with `theta(0) = 1/2`,
    /// the symbol that `bv_multiplier` realizes exactly.
    pub fn symbol_at(&self, xi: f64, eta: f64) -> Complex64 {
        self.atoms.iter().map(|a| a.mu * heaviside(xi - a.t) * heaviside(eta - a.s)).sum()
    }
}

fn heaviside(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x == 0.0 {
        0.5
    } else {
        0.0
    }
}

type Linear = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;
type Bilinear = Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>;

/// A bounded symbol `m(xi, eta)` together with where it came from.
#[derive(Clone)]
pub enum Symbol {
    FromMeasure(AtomicMeasure),
    Tensor(Linear, Linear),
    Raw(Bilinear),
}

impl Symbol {
    pub fn tensor(m1: impl Fn(f64) -> Complex64 + Send + Sync + 'static, m2: impl Fn(f64) -> Complex64 + Send + Sync + 'static) -> Self {
        Self::Tensor(Arc::new(m1), Arc::new(m2))
    }

    pub fn raw(m: impl Fn(f64, f64) -> Complex64 + Send + Sync + 'static) -> Self {
        Self::Raw(Arc::new(m))
    }

    pub fn eval(&self, xi: f64, eta: f64) -> Complex64 {
        match self {
            Self::FromMeasure(mu) => mu.symbol_at(xi, eta),
            Self::Tensor(a, b) => a(xi) * b(eta),
            Self::Raw(m) => m(xi, eta),
        }
    }
}

impl std::fmt::Debug for Symbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::FromMeasure(mu) => f.debug_tuple("FromMeasure").field(mu).finish(),
            Self::Tensor(..) => f.write_str("Tensor(..)"),
            Self::Raw(..) => f.write_str("Raw(..)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BvProduct {
    pub value: ComplexFunction,
    /// Set when the measure had no atoms and the result is the zero function.
    pub empty_measure: bool,
}

/// `sum_j mu_j H_{t_j, s_j}(f, g)`. Atoms are evaluated in parallel and summed in
/// atom order, so the result does not depend on scheduling.
pub fn bv_multiplier<T: Sample, U: Sample>(
    f: &SampledFunction<T>,
    g: &SampledFunction<U>,
    mu: &AtomicMeasure,
    backend: HilbertBackend,
) -> BvProduct {
    let grid = *f.grid();
    if mu.atoms().is_empty() {
        return BvProduct { value: ComplexFunction::zeros(grid, f.extension()), empty_measure: true };
    }
    let terms: Vec<ComplexFunction> = mu
        .atoms()
        .par_iter()
        .map(|a| bilinear_hts(f, g, a.t, a.s, backend).map(|z| z * a.mu))
        .collect();
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    for t in &terms {
        for (x, y) in acc.iter_mut().zip(t.samples()) {
            *x += *y;
        }
    }
    BvProduct {
        value: ComplexFunction::new(grid, acc, f.extension()).expect("length preserved"),
        empty_measure: false,
    }
}

fn active(s: &Spectrum) -> Vec<(i64, Complex64)> {
    let peak = s.coefficients().iter().map(|c| c.norm()).fold(0.0, f64::max);
    s.wavenumbers()
        .zip(s.coefficients())
        .filter(|(_, c)| c.norm() > ACTIVE_THRESHOLD * peak)
        .map(|(k, &c)| (k, c))
        .collect()
}

/// `sum_{k,l} m(xi_k, xi_l) F_k G_l e^{2 pi i (xi_k + xi_l) x}` for periodic input.
pub fn direct_multiplier<T: Sample, U: Sample>(
    f: &SampledFunction<T>,
    g: &SampledFunction<U>,
    m: &Symbol,
) -> Result<ComplexFunction, OperatorError> {
    if f.grid() != g.grid() {
        return Err(OperatorError::GridMismatch);
    }
    if f.extension() != Extension::Periodic || g.extension() != Extension::Periodic {
        return Err(OperatorError::NotPeriodic);
    }
    let grid = *f.grid();
    let n = grid.len();
    let sf = spectral_transform(f)?;
    let sg = spectral_transform(g)?;
    let af = active(&sf);
    let ag = active(&sg);
    if n > DIRECT_FULL_LIMIT && af.len().max(ag.len()) > DIRECT_BAND_BUDGET {
        return Err(OperatorError::BandBudget { active: af.len().max(ag.len()), budget: DIRECT_BAND_BUDGET });
    }
    let half = (n / 2) as i64;
    let rows: Vec<Vec<Complex64>> = af
        .par_iter()
        .map(|&(k, fk)| {
            let mut row = vec![Complex64::new(0.0, 0.0); n];
            let xi = grid.frequency(k);
            for &(l, gl) in &ag {
                let idx = (k + l + half).rem_euclid(n as i64) as usize;
                row[idx] += m.eval(xi, grid.frequency(l)) * fk * gl;
            }
            row
        })
        .collect();
    let mut out = sf;
    let scale = 1.0 / (2.0 * grid.half_length());
    for c in out.coefficients_mut() {
        *c = Complex64::new(0.0, 0.0);
    }
    for row in &rows {
        for (c, r) in out.coefficients_mut().iter_mut().zip(row) {
            *c += *r * scale;
        }
    }
    Ok(inverse_spectral_transform(&out))
}
