//! Sup-over-intervals estimators for weight constants.
//!
//! Every scan runs over intervals with endpoints on a lattice inside a window
//! (by default the inner window). With stride 1 the scan is exhaustive.

use rayon::prelude::*;

use super::{Weight, WeightError};
use crate::grid::{Interval, PrefixSums, RealFunction};
use crate::operators::maximal::{maximal_cells_of, maximal_points_closed};

/// Windows up to this many cells are scanned exhaustively by default.
pub const EXHAUSTIVE_CELLS: usize = 512;
/// Otherwise the stride keeps this many intervals between lattice endpoints.
pub const DEFAULT_SEGMENTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScanOptions {
    pub window: Option<Interval>,
    pub stride: Option<usize>,
}

impl ScanOptions {
    pub fn exhaustive() -> Self {
        Self { window: None, stride: Some(1) }
    }

    pub fn with_stride(stride: usize) -> Self {
        Self { window: None, stride: Some(stride) }
    }

    fn window_for(&self, w: &RealFunction) -> Interval {
        self.window.unwrap_or_else(|| w.grid().inner_window())
    }

    /// Lattice endpoints `start, start + s, ..., end` (end always included).
    fn endpoints(&self, window: Interval) -> Vec<usize> {
        let cells = window.cells();
        let stride = self
            .stride
            .unwrap_or(if cells <= EXHAUSTIVE_CELLS { 1 } else { (cells / DEFAULT_SEGMENTS).max(1) })
            .max(1);
        let mut e: Vec<usize> = (window.start()..window.end()).step_by(stride).collect();
        e.push(window.end());
        e
    }
}

fn max_reduce(values: impl ParallelIterator<Item = f64>) -> f64 {
    // NaN never wins a comparison, +inf does
    values.reduce(|| 0.0, |a, b| if b > a || b.is_nan() && a == 0.0 { b } else { a })
}

/// `[w]_{A_q} = sup_Q avg_Q(w) avg_Q(w^{1-q'})^{q-1}`, `q > 1`. Overflow of
/// `w^{1-q'}` shows up as `+inf`.
pub fn ap_constant(w: &RealFunction, q: f64, opts: ScanOptions) -> Result<f64, WeightError> {
    if !(q.is_finite() && q > 1.0) {
        return Err(WeightError::Exponent { name: "q", value: q, expected: "q > 1" });
    }
    let window = opts.window_for(w);
    let ends = opts.endpoints(window);
    let vals = &w.samples()[window.range()];
    let top = vals.iter().copied().fold(0.0, f64::max);
    let wn: Vec<f64> = vals.iter().map(|v| v / top).collect();
    let dual: Vec<f64> = wn.iter().map(|v| v.powf(-1.0 / (q - 1.0))).collect();
    let pw = PrefixSums::new(&wn);
    let pd = PrefixSums::new(&dual);
    let off = window.start();
    Ok(max_reduce(ends.par_iter().enumerate().map(|(ia, &a)| {
        let mut best = 0.0f64;
        for &b in &ends[ia + 1..] {
            let (x, y) = (a - off, b - off);
            let v = pw.mean(x, y) * pd.mean(x, y).powf(q - 1.0);
            if v > best || v.is_nan() {
                best = v;
            }
        }
        best
    })))
}

/// `ess sup Mw / w` over the window, with `M` in cell values on the whole grid.
pub fn a1_constant(w: &RealFunction) -> f64 {
    let window = w.grid().inner_window();
    a1_constant_on(w, window)
}

pub fn a1_constant_on(w: &RealFunction, window: Interval) -> f64 {
    let m = maximal_cells_of(w.samples());
    window.range().map(|i| m[i] / w.samples()[i]).fold(0.0, f64::max)
}

/// `[w]_{A_q^R} = sup_Q sup_{E subset Q} (|E|/|Q|)(w(Q)/w(E))^{1/q}`, `q >= 1`.
///
/// For `|E| = k` cells the ratio is largest when `E` holds the `k` smallest values
/// of `w` on `Q`, so each `Q` needs its cells in increasing order. Per left
/// endpoint the sorted list grows by merging one sorted block per stride.
pub fn apr_constant(w: &RealFunction, q: f64, opts: ScanOptions) -> Result<f64, WeightError> {
    if !(q.is_finite() && q >= 1.0) {
        return Err(WeightError::Exponent { name: "q", value: q, expected: "q >= 1" });
    }
    let window = opts.window_for(w);
    let ends = opts.endpoints(window);
    let samples = w.samples();
    let top = samples[window.range()].iter().copied().fold(0.0, f64::max);
    let best = max_reduce(ends.par_iter().enumerate().map(|(ia, &a)| {
        let mut sorted: Vec<f64> = Vec::new();
        let mut merged: Vec<f64> = Vec::new();
        let mut block: Vec<f64> = Vec::new();
        let mut best = 0.0f64;
        let mut prev = a;
        for &b in &ends[ia + 1..] {
            block.clear();
            block.extend(samples[prev..b].iter().map(|v| v / top));
            block.sort_by(f64::total_cmp);
            merged.clear();
            let (mut i, mut j) = (0, 0);
            while i < sorted.len() || j < block.len() {
                if j == block.len() || (i < sorted.len() && sorted[i] <= block[j]) {
                    merged.push(sorted[i]);
                    i += 1;
                } else {
                    merged.push(block[j]);
                    j += 1;
                }
            }
            std::mem::swap(&mut sorted, &mut merged);
            prev = b;
            let n = sorted.len() as f64;
            let total: f64 = sorted.iter().sum();
            let mut partial = 0.0;
            for (k, v) in sorted.iter().enumerate() {
                partial += v;
                let t = (k + 1) as f64 / n;
                let val = t.powf(q) * total / partial;
                if val > best {
                    best = val;
                }
            }
        }
        best
    }));
    Ok(best.powf(1.0 / q))
}

/// Fujii-Wilson `sup_Q (1/w(Q)) int_Q M(w chi_Q)`, with `M(w chi_Q)` integrated by
/// the trapezoid rule between its values at the cell edges of `Q`.
pub fn fujii_wilson(w: &RealFunction, opts: ScanOptions) -> f64 {
    let window = opts.window_for(w);
    let ends = opts.endpoints(window);
    let samples = w.samples();
    max_reduce(ends.par_iter().enumerate().map(|(ia, &a)| {
        let mut best = 0.0f64;
        for &b in &ends[ia + 1..] {
            let local = &samples[a..b];
            let m = maximal_points_closed(local);
            let integral: f64 = m.windows(2).map(|p| 0.5 * (p[0] + p[1])).sum();
            let mass: f64 = local.iter().sum();
            best = best.max(integral / mass);
        }
        best
    }))
}

/// `[v]_{RH_inf} = sup_Q (sup_Q v) |Q| / v(Q)`.
pub fn rh_inf_constant(v: &RealFunction, opts: ScanOptions) -> f64 {
    let window = opts.window_for(v);
    let ends = opts.endpoints(window);
    let samples = v.samples();
    max_reduce(ends.par_iter().enumerate().map(|(ia, &a)| {
        let mut best = 0.0f64;
        let (mut top, mut sum) = (0.0f64, 0.0f64);
        let mut prev = a;
        for &b in &ends[ia + 1..] {
            for &x in &samples[prev..b] {
                top = top.max(x);
                sum += x;
            }
            prev = b;
            best = best.max(top * (b - a) as f64 / sum);
        }
        best
    }))
}

/// `[u]_{A_1} [v]_{RH_inf}` for the factorization `w = u v` stored in the
/// weight's provenance; an upper bound for `[w]_{RH_inf^1}`.
pub fn rh1_bound(w: &Weight, opts: ScanOptions) -> Result<f64, WeightError> {
    let (u, v) = w.factorization()?;
    Ok(a1_constant(&u) * rh_inf_constant(&v, opts))
}
