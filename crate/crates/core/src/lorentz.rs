//! Distribution functions, decreasing rearrangements and Lorentz quasi-norms with
//! respect to a weighted measure `w dx` restricted to a window of cells.
//!
//! The rearrangement of a step function is itself a step function on the mass
//! axis, so every norm here is evaluated in closed form on each step.

use thiserror::Error;

use crate::grid::{CompensatedSum, Grid, Interval, RealFunction, Sample, SampledFunction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LorentzError {
    #[error("function has non-finite samples")]
    NonFinite,
    #[error("density must be positive and finite on the window (cell {0})")]
    BadDensity(usize),
    #[error("exponent must be positive and finite, got {0}")]
    BadExponent(f64),
    #[error("Kolmogorov functional needs 0 < r < q, got r = {r}, q = {q}")]
    KolmogorovRange { r: f64, q: f64 },
    #[error("window does not fit the grid")]
    Window,
    #[error("function and measure live on different grids")]
    GridMismatch,
}

/// The measure `w dx` on the cells of a window.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureView {
    grid: Grid,
    window: Interval,
    masses: Vec<f64>,
}

impl MeasureView {
    pub fn new(density: &RealFunction, window: Interval) -> Result<Self, LorentzError> {
        let grid = *density.grid();
        if window.end() > grid.len() {
            return Err(LorentzError::Window);
        }
        let h = grid.spacing();
        let mut masses = Vec::with_capacity(window.cells());
        for i in window.range() {
            let w = density.samples()[i];
            if !(w.is_finite() && w > 0.0) {
                return Err(LorentzError::BadDensity(i));
            }
            masses.push(w * h);
        }
        Ok(Self { grid, window, masses })
    }

    /// Lebesgue measure on the window.
    pub fn lebesgue(grid: Grid, window: Interval) -> Self {
        Self { grid, window, masses: vec![grid.spacing(); window.cells()] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn window(&self) -> Interval {
        self.window
    }

    /// Mass of each cell of the window.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().copied().collect::<CompensatedSum>().value()
    }

    /// `nu(E)` for `E` given as a predicate on global cell indices.
    pub fn measure_where(&self, mut pred: impl FnMut(usize) -> bool) -> f64 {
        let start = self.window.start();
        self.masses
            .iter()
            .enumerate()
            .filter(|(k, _)| pred(start + k))
            .map(|(_, &m)| m)
            .collect::<CompensatedSum>()
            .value()
    }
}

/// One step of a rearrangement: value `v` on `(t_prev, t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub value: f64,
    pub mass_end: f64,
}

fn values_in_window<T: Sample>(f: &SampledFunction<T>, nu: &MeasureView) -> Result<Vec<f64>, LorentzError> {
    if f.grid() != nu.grid() {
        return Err(LorentzError::GridMismatch);
    }
    let v: Vec<f64> = f.samples()[nu.window().range()].iter().map(|x| x.modulus()).collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(LorentzError::NonFinite);
    }
    Ok(v)
}

/// Decreasing rearrangement of `|values|` against `masses` as nonzero steps,
/// ties merged, cumulative masses accumulated with compensation.
pub fn rearrangement_of(values: &[f64], masses: &[f64]) -> Vec<Step> {
    let mut order: Vec<usize> = (0..values.len()).filter(|&i| values[i] > 0.0).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut steps: Vec<Step> = Vec::new();
    let mut acc = CompensatedSum::default();
    for i in order {
        acc.add(masses[i]);
        match steps.last_mut() {
            Some(last) if last.value == values[i] => last.mass_end = acc.value(),
            _ => steps.push(Step { value: values[i], mass_end: acc.value() }),
        }
    }
    steps
}

pub fn rearrangement<T: Sample>(f: &SampledFunction<T>, nu: &MeasureView) -> Result<Vec<Step>, LorentzError> {
    Ok(rearrangement_of(&values_in_window(f, nu)?, nu.masses()))
}

/// `nu({|f| > lambda})`.
pub fn distribution<T: Sample>(f: &SampledFunction<T>, nu: &MeasureView, lambda: f64) -> f64 {
    nu.measure_where(|i| f.samples()[i].modulus() > lambda)
}

fn check_exponent(p: f64) -> Result<(), LorentzError> {
    if p.is_finite() && p > 0.0 {
        Ok(())
    } else {
        Err(LorentzError::BadExponent(p))
    }
}

/// `(sum_k v_k^q (p/q)(t_k^{q/p} - t_{k-1}^{q/p}))^{1/q}`.
pub fn lorentz_norm_of_steps(steps: &[Step], p: f64, q: f64) -> f64 {
    let a = q / p;
    let mut acc = CompensatedSum::default();
    let mut prev = 0.0f64;
    for s in steps {
        acc.add(s.value.powf(q) * (s.mass_end.powf(a) - prev.powf(a)));
        prev = s.mass_end;
    }
    ((p / q) * acc.value()).powf(1.0 / q)
}

/// `||f||_{L^{p,q}(nu)}`.
pub fn lorentz_norm<T: Sample>(f: &SampledFunction<T>, nu: &MeasureView, p: f64, q: f64) -> Result<f64, LorentzError> {
    check_exponent(p)?;
    check_exponent(q)?;
    Ok(lorentz_norm_of_steps(&rearrangement(f, nu)?, p, q))
}

/// `max_k v_k t_k^{1/p}`; the supremum of `lambda nu(|f| > lambda)^{1/p}` is
/// approached as `lambda` rises to each value from below.
pub fn weak_norm_of_steps(steps: &[Step], p: f64) -> f64 {
    steps.iter().map(|s| s.value * s.mass_end.powf(1.0 / p)).fold(0.0, f64::max)
}

/// `||f||_{L^{p,inf}(nu)}`.
pub fn weak_norm<T: Sample>(f: &SampledFunction<T>, nu: &MeasureView, p: f64) -> Result<f64, LorentzError> {
    check_exponent(p)?;
    Ok(weak_norm_of_steps(&rearrangement(f, nu)?, p))
}

/// `(sup_E nu(E)^{r/q - 1} int_E f1^r u v^{q-r})^{1/r}` with `nu = u v^q`.
///
/// Writing `g = f1/v` the integrand is `g^r dnu`. On a step of the rearrangement
/// of `g` the functional is first decreasing then increasing in the mass taken,
/// so the supremum is attained at unions of whole level sets.
pub fn kolmogorov_rhs(
    f1: &RealFunction,
    v: &RealFunction,
    u: &RealFunction,
    window: Interval,
    q: f64,
    r: f64,
) -> Result<f64, LorentzError> {
    if !(q.is_finite() && r > 0.0 && r < q) {
        return Err(LorentzError::KolmogorovRange { r, q });
    }
    let nu_density = u.zip_with(v, |a, b| a * b.powf(q)).map_err(|_| LorentzError::GridMismatch)?;
    let nu = MeasureView::new(&nu_density, window)?;
    let g = f1.zip_with(v, |a, b| a.abs() / b).map_err(|_| LorentzError::GridMismatch)?;
    let steps = rearrangement(&g, &nu)?;
    let mut best = 0.0f64;
    let mut integral = CompensatedSum::default();
    let mut prev = 0.0;
    for s in &steps {
        integral.add(s.value.powf(r) * (s.mass_end - prev));
        prev = s.mass_end;
        best = best.max(s.mass_end.powf(r / q - 1.0) * integral.value());
    }
    Ok(best.powf(1.0 / r))
}
