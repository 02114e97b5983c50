//! Rubio de Francia iteration `R h = sum_k L^k h / (2 K0)^k` with
//! `L f = M(u0 f) / u0`, and the estimate of `(p0, K0)` that makes it converge.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::grid::{Extension, RealFunction};
use crate::lorentz::{lorentz_norm, LorentzError, MeasureView};
use crate::operators::maximal_cells;
use crate::weights::{a1_constant, ap_constant, ScanOptions, Weight, WeightError};

/// Terms kept by default: `2^{-27} < 1e-8`.
pub const DEFAULT_K_MAX: usize = 27;
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RdfError {
    #[error("input must be nonnegative (cell {0})")]
    Negative(usize),
    #[error("input vanishes identically")]
    Zero,
    #[error("need K0 > 0 and p >= p0 > 1 (K0 = {k0}, p0 = {p0}, p = {p})")]
    Config { k0: f64, p0: f64, p: f64 },
    #[error("tail bound {bound:e} exceeds tolerance {tol:e} after {k_max} terms")]
    Tail { bound: f64, tol: f64, k_max: usize },
    #[error("nu has no exponent data; it must be a product of (Mh)^(-alpha) factors")]
    NoExponents,
    #[error("empty test family")]
    EmptyFamily,
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Lorentz(#[from] LorentzError),
}

/// `f -> M(u0 f) / u0` in cell values.
pub fn l_op(u0: &Weight, f: &RealFunction) -> Result<RealFunction, RdfError> {
    if let Some(i) = f.samples().iter().position(|&v| !(v >= 0.0)) {
        return Err(RdfError::Negative(i));
    }
    let prod = f.zip_with(u0.function(), |a, b| a * b).map_err(|_| WeightError::GridMismatch)?;
    let m = maximal_cells(&prod);
    Ok(m.zip_with(u0.function(), |a, b| a / b).expect("same grid"))
}

#[derive(Debug, Clone)]
pub struct RdfConfig {
    pub u0: Weight,
    pub nu: Weight,
    pub s: f64,
    pub p: f64,
    pub k0: f64,
    pub p0: f64,
    pub k_max: usize,
    pub tail_tol: f64,
}

impl RdfConfig {
    pub fn new(u0: Weight, nu: Weight, s: f64, p: f64, estimate: &K0Estimate) -> Self {
        Self { u0, nu, s, p, k0: estimate.k0, p0: estimate.p0, k_max: DEFAULT_K_MAX, tail_tol: DEFAULT_TAIL_TOL }
    }

    fn validate(&self) -> Result<(), RdfError> {
        if !(self.k0 > 0.0 && self.p0 > 1.0 && self.p >= self.p0 && self.k0.is_finite() && self.p.is_finite()) {
            return Err(RdfError::Config { k0: self.k0, p0: self.p0, p: self.p });
        }
        Ok(())
    }

    /// Density of `u0 nu^s`.
    pub fn measure_density(&self) -> RealFunction {
        let s = self.s;
        self.u0.function().zip_with(self.nu.function(), |u, v| u * v.powf(s)).expect("same grid")
    }
}

/// Post-hoc checks on `R h`.
#[derive(Debug, Clone, Serialize)]
pub struct RdfDiagnostics {
    /// `h <= R h` at every cell.
    pub dominates: bool,
    /// `[u0 R h]_{A_1} / (2 K0)`.
    pub a1_ratio: f64,
    /// `||R h|| / ||h||` in `L^{p,1}(u0 nu^s)`.
    pub norm_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct RdfOutput {
    pub rh: RealFunction,
    pub terms: usize,
    /// Sup-norm bound on everything beyond the last term.
    pub tail_bound: f64,
    pub diagnostics: RdfDiagnostics,
}

/// Sup-norm bound on `sum_{k > k_max} L^k h / (2K0)^k`, from `||L||_{inf} <= [u0]_{A_1}`.
pub fn tail_bound(h_sup: f64, a1: f64, k0: f64, k_max: usize) -> f64 {
    let rho = a1 / (2.0 * k0);
    if rho >= 1.0 {
        return f64::INFINITY;
    }
    h_sup * rho.powi(k_max as i32 + 1) / (1.0 - rho)
}

/// Truncated sum with `k_max + 1` terms, plus the checks on the result.
pub fn rdf_iterate(cfg: &RdfConfig, h: &RealFunction) -> Result<RdfOutput, RdfError> {
    cfg.validate()?;
    if let Some(i) = h.samples().iter().position(|&v| !(v >= 0.0)) {
        return Err(RdfError::Negative(i));
    }
    if h.is_zero() {
        return Err(RdfError::Zero);
    }
    let a1 = a1_constant(cfg.u0.function());
    let h_sup = h.max_modulus();
    let tail = tail_bound(h_sup, a1, cfg.k0, cfg.k_max);
    if !(tail <= cfg.tail_tol * h_sup) {
        return Err(RdfError::Tail { bound: tail, tol: cfg.tail_tol * h_sup, k_max: cfg.k_max });
    }
    let rh = partial_sum(cfg, h, cfg.k_max)?;
    let diagnostics = diagnose(cfg, h, &rh)?;
    Ok(RdfOutput { rh, terms: cfg.k_max + 1, tail_bound: tail, diagnostics })
}

/// `sum_{k=0}^{k_max} L^k h / (2K0)^k`.
pub fn partial_sum(cfg: &RdfConfig, h: &RealFunction, k_max: usize) -> Result<RealFunction, RdfError> {
    let mut term = h.clone();
    let mut acc = h.clone();
    let c = 1.0 / (2.0 * cfg.k0);
    for _ in 0..k_max {
        term = l_op(&cfg.u0, &term)?.scaled(c);
        for (a, t) in acc.samples_mut().iter_mut().zip(term.samples()) {
            *a += t;
        }
    }
    Ok(acc)
}

fn diagnose(cfg: &RdfConfig, h: &RealFunction, rh: &RealFunction) -> Result<RdfDiagnostics, RdfError> {
    let dominates = h.samples().iter().zip(rh.samples()).all(|(a, b)| a <= b);
    let weighted = rh.zip_with(cfg.u0.function(), |a, b| a * b).expect("same grid");
    let a1_ratio = a1_constant(&weighted) / (2.0 * cfg.k0);
    let nu = MeasureView::new(&cfg.measure_density(), h.grid().inner_window())?;
    let norm_ratio = lorentz_norm(rh, &nu, cfg.p, 1.0)? / lorentz_norm(h, &nu, cfg.p, 1.0)?;
    Ok(RdfDiagnostics { dominates, a1_ratio, norm_ratio })
}

#[derive(Debug, Clone, Serialize)]
pub struct K0Estimate {
    pub a1_u0: f64,
    pub epsilon: f64,
    pub alpha_sum: f64,
    pub p0: f64,
    /// Largest measured `||Mf|| / ||f||` in `L^{p0}(u0^{1-p0} nu^s)`.
    pub c0: f64,
    pub c1: f64,
    pub k0: f64,
    /// `[u0^{1-p0} nu^s]_{A_{p0}}^{1/(p0-1)}`, the route through the sharp `A_p` bound.
    pub buckley_bound: f64,
}

/// `(p0, K0)` for `u0 in A_1` and `nu = prod_j (M h_j)^{-alpha_j}`:
/// `eps = 1/(4 [u0]_{A_1})`, `p0 = 1 + 2 ((1 + eps)/eps) s sum_j alpha_j`,
/// `C1 = [u0]_{A_1}`, `C0` measured on `family`, `K0 = 4 p0 (C0 + C1)`.
pub fn k0_estimate(u0: &Weight, nu: &Weight, s: f64, family: &[RealFunction]) -> Result<K0Estimate, RdfError> {
    if family.is_empty() {
        return Err(RdfError::EmptyFamily);
    }
    let alpha_sum = nu.maximal_decay_exponent().filter(|a| *a > 0.0).ok_or(RdfError::NoExponents)?;
    let a1_u0 = a1_constant(u0.function());
    let epsilon = 1.0 / (4.0 * a1_u0);
    let p0 = 1.0 + 2.0 * ((1.0 + epsilon) / epsilon) * s * alpha_sum;
    let log_sigma: Vec<f64> = u0
        .samples()
        .iter()
        .zip(nu.samples())
        .map(|(u, v)| (1.0 - p0) * u.ln() + s * v.ln())
        .collect();
    let window = u0.grid().inner_window();
    let c0 = family
        .par_iter()
        .map(|f| {
            let mf = maximal_cells(f);
            let num = log_norm(mf.samples(), &log_sigma, window.range(), p0);
            let den = log_norm(f.samples(), &log_sigma, window.range(), p0);
            if den == f64::NEG_INFINITY {
                0.0
            } else {
                (num - den).exp()
            }
        })
        .reduce(|| 0.0, f64::max);
    let c1 = a1_u0;
    let k0 = 4.0 * p0 * (c0 + c1);
    let sigma_max = window.range().map(|i| log_sigma[i]).fold(f64::NEG_INFINITY, f64::max);
    let sigma = RealFunction::new(*u0.grid(), log_sigma.iter().map(|l| (l - sigma_max).exp().max(f64::MIN_POSITIVE)).collect(), Extension::ZeroPadded)
        .expect("length preserved");
    let buckley_bound = ap_constant(&sigma, p0, ScanOptions::default())?.powf(1.0 / (p0 - 1.0));
    Ok(K0Estimate { a1_u0, epsilon, alpha_sum, p0, c0, c1, k0, buckley_bound })
}

/// `log ||f||_{L^p(sigma)}` over a range of cells, from `log sigma`, by log-sum-exp.
fn log_norm(f: &[f64], log_sigma: &[f64], range: std::ops::Range<usize>, p: f64) -> f64 {
    let logs: Vec<f64> = range
        .filter(|&i| f[i] != 0.0)
        .map(|i| p * f[i].abs().ln() + log_sigma[i])
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    (top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln()) / p
}
