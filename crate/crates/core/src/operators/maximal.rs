//! Uncentered Hardy-Littlewood maximal operator on grid step functions.
//!
//! `maximal(f)[i]` is the supremum of `avg(|f|, [x_a, x_b))` over all grid
//! intervals whose closure contains `x_i`, i.e. `a <= i <= b`. For a step
//! function this is the exact continuum value of `Mf(x_i)`, because averages
//! over intervals with off-grid endpoints are dominated by grid ones.

use crate::grid::{PrefixSums, RealFunction, Sample, SampledFunction};

/// Point values `Mf(x_i)`.
pub fn maximal<T: Sample>(f: &SampledFunction<T>) -> RealFunction {
    let abs: Vec<f64> = f.samples().iter().map(|v| v.modulus()).collect();
    let values = maximal_points(&abs);
    RealFunction::new(*f.grid(), values, f.extension()).expect("length preserved")
}

/// Cell values `sup_{x in [x_i, x_{i+1}]} Mf(x) = max(Mf(x_i), Mf(x_{i+1}))`.
pub fn maximal_cells<T: Sample>(f: &SampledFunction<T>) -> RealFunction {
    let abs: Vec<f64> = f.samples().iter().map(|v| v.modulus()).collect();
    let values = maximal_cells_of(&abs);
    RealFunction::new(*f.grid(), values, f.extension()).expect("length preserved")
}

/// Cell values of `M` for a nonnegative array, treating it as zero outside.
pub fn maximal_cells_of(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let points = maximal_points_closed(values);
    (0..n).map(|i| points[i].max(points[i + 1])).collect()
}

/// `M` at the `n` left cell edges of a nonnegative array.
pub fn maximal_points(values: &[f64]) -> Vec<f64> {
    let mut m = maximal_points_closed(values);
    m.pop();
    m
}

/// `M` at all `n + 1` cell edges.
pub fn maximal_points_closed(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n == 0 {
        return vec![0.0];
    }
    // any interval with a <= i <= b splits at i into two pieces whose averages
    // bracket the whole, so it suffices to look at intervals starting or ending at i
    let right = right_anchored(&PrefixSums::new(values));
    let reversed: Vec<f64> = values.iter().rev().copied().collect();
    let left = right_anchored(&PrefixSums::new(&reversed));
    (0..=n).map(|i| right[i].max(left[n - i])).collect()
}

/// `out[i] = max_{b > i} avg[i, b)` for `i in 0..=n`, with `out[n] = 0`.
///
/// The best `b` is the tangent point from `(i, P_i)` to the upper convex hull of
/// `{(j, P_j) : j > i}`. Sweeping `i` downward keeps that hull on a stack; points
/// below the chord from `i` can never be tangent points for smaller `i` either.
fn right_anchored(prefix: &PrefixSums) -> Vec<f64> {
    let n = prefix.len();
    let p: Vec<f64> = (0..=n).map(|j| prefix.sum(0, j)).collect();
    let mut out = vec![0.0; n + 1];
    let mut hull: Vec<usize> = Vec::with_capacity(n + 1);
    hull.push(n);
    for i in (0..n).rev() {
        // pop the nearest hull point while the next one is at least as steep
        while hull.len() >= 2 {
            let near = hull[hull.len() - 1];
            let far = hull[hull.len() - 2];
            let lhs = (p[near] - p[i]) * (far - i) as f64;
            let rhs = (p[far] - p[i]) * (near - i) as f64;
            if lhs <= rhs {
                hull.pop();
            } else {
                break;
            }
        }
        let b = *hull.last().expect("hull never empty");
        out[i] = prefix.sum(i, b) / (b - i) as f64;
        hull.push(i);
    }
    out
}

/// O(n^2) scan over every interval; the oracle for the hull sweep.
pub fn maximal_points_reference(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let prefix = PrefixSums::new(values);
    let mut out = vec![0.0f64; n + 1];
    let mut suffix = vec![0.0f64; n + 2];
    for a in 0..n {
        // suffix[i] = max_{b >= max(i, a + 1)} avg[a, b)
        suffix[n + 1] = 0.0;
        for b in (a + 1..=n).rev() {
            suffix[b] = suffix[b + 1].max(prefix.sum(a, b) / (b - a) as f64);
        }
        for i in a..=n {
            let best = if i == a { suffix[a + 1] } else { suffix[i] };
            out[i] = out[i].max(best);
        }
    }
    out.truncate(n);
    out
}
