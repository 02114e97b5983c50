//! Seeded test-function families. Members are continuum functions supported in
//! `[-2, 2]`, so the same member can be sampled on any grid of the experiment.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::grid::{Extension, Grid, RealFunction};
use crate::weights::expr::bump;

/// Endpoints of indicators and steps sit on this lattice.
pub const LATTICE: f64 = 1.0 / 64.0;
/// Members vanish outside `[-SUPPORT, SUPPORT]`.
pub const SUPPORT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FamilyKind {
    Indicators,
    Steps,
    Trig,
    Bumps,
    /// Cycles through the other four.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TestFunction {
    Indicator { a: f64, b: f64 },
    /// `sum c chi_[a, b)` over disjoint pieces `(a, b, c)`.
    Steps { pieces: Vec<(f64, f64, f64)> },
    /// `bump(x, 0, 2) sum_k a_k cos(pi k x / 2 + phi_k)`, `k = 1, 2, ...`.
    Trig { terms: Vec<(f64, f64)> },
    Bump { c: f64, r: f64, height: f64 },
    Scaled(Box<TestFunction>, f64),
    Zero,
}

impl TestFunction {
    pub fn evaluate(&self, grid: Grid) -> RealFunction {
        match self {
            Self::Indicator { a, b } => RealFunction::indicator(grid, *a, *b),
            Self::Steps { pieces } => {
                let mut out = RealFunction::zeros(grid, Extension::ZeroPadded);
                for &(a, b, c) in pieces {
                    let chi = RealFunction::indicator(grid, a, b);
                    for (o, x) in out.samples_mut().iter_mut().zip(chi.samples()) {
                        *o += c * x;
                    }
                }
                out
            }
            Self::Trig { terms } => RealFunction::from_fn(grid, Extension::ZeroPadded, |x| {
                let window = bump(x, 0.0, SUPPORT);
                if window == 0.0 {
                    return 0.0;
                }
                let s: f64 = terms
                    .iter()
                    .enumerate()
                    .map(|(k, (amp, phase))| amp * (std::f64::consts::PI * (k + 1) as f64 * x / 2.0 + phase).cos())
                    .sum();
                window * s
            }),
            Self::Bump { c, r, height } => RealFunction::from_fn(grid, Extension::ZeroPadded, |x| height * bump(x, *c, *r)),
            Self::Scaled(f, c) => f.evaluate(grid).scaled(*c),
            Self::Zero => RealFunction::zeros(grid, Extension::ZeroPadded),
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Indicator { a, b } => write!(f, "indicator({a:?},{b:?})"),
            Self::Steps { pieces } => {
                f.write_str("steps(")?;
                for (i, (a, b, c)) in pieces.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "{a:?}:{b:?}:{c:?}")?;
                }
                f.write_str(")")
            }
            Self::Trig { terms } => {
                f.write_str("trig(")?;
                for (i, (a, p)) in terms.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "{a:?}:{p:?}")?;
                }
                f.write_str(")")
            }
            Self::Bump { c, r, height } => write!(f, "bump({c:?},{r:?},{height:?})"),
            Self::Scaled(g, c) => write!(f, "{c:?}*{g}"),
            Self::Zero => f.write_str("zero"),
        }
    }
}

fn lattice_point(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> f64 {
    rng.gen_range(lo..=hi) as f64 * LATTICE
}

fn draw(kind: FamilyKind, rng: &mut ChaCha8Rng) -> TestFunction {
    let edge = (SUPPORT / LATTICE) as i64;
    match kind {
        FamilyKind::Indicators => {
            let a = lattice_point(rng, -edge, edge - 1);
            let len = lattice_point(rng, 1, edge);
            TestFunction::Indicator { a, b: (a + len).min(SUPPORT) }
        }
        FamilyKind::Steps => {
            let pieces = rng.gen_range(2..=6);
            let mut cuts: Vec<i64> = Vec::with_capacity(pieces + 1);
            while cuts.len() < pieces + 1 {
                let c = rng.gen_range(-edge..=edge);
                if !cuts.contains(&c) {
                    cuts.push(c);
                }
            }
            cuts.sort_unstable();
            let pieces = cuts
                .windows(2)
                .map(|w| (w[0] as f64 * LATTICE, w[1] as f64 * LATTICE, rng.gen_range(0.05..1.0)))
                .collect();
            TestFunction::Steps { pieces }
        }
        FamilyKind::Trig => {
            let k = rng.gen_range(1..=6);
            let terms = (0..k)
                .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU)))
                .collect();
            TestFunction::Trig { terms }
        }
        FamilyKind::Bumps => {
            let r = rng.gen_range(0.1..1.0);
            let c = rng.gen_range(-SUPPORT + r..SUPPORT - r);
            TestFunction::Bump { c, r, height: rng.gen_range(0.5..2.0) }
        }
        FamilyKind::Mixed => unreachable!("mixed families draw concrete kinds"),
    }
}

impl FamilySpec {
    /// `count` members from the given stream. Streams `1` and `2` supply the
    /// first and second arguments of bilinear experiments.
    pub fn sample(&self, seed: u64, stream: u64) -> Vec<TestFunction> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        const CYCLE: [FamilyKind; 4] = [FamilyKind::Indicators, FamilyKind::Steps, FamilyKind::Trig, FamilyKind::Bumps];
        (0..self.count)
            .map(|i| {
                let kind = if self.kind == FamilyKind::Mixed { CYCLE[i % 4] } else { self.kind };
                draw(kind, &mut rng)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_supported() {
        let spec = FamilySpec { kind: FamilyKind::Mixed, count: 12 };
        let a = spec.sample(5, 1);
        assert_eq!(a, spec.sample(5, 1));
        assert_ne!(a, spec.sample(5, 2));
        let g = Grid::with_points(1024).unwrap();
        for f in &a {
            let v = f.evaluate(g);
            assert!(!v.is_zero(), "{f}");
            for (i, x) in v.samples().iter().enumerate() {
                if g.point(i) + g.spacing() <= -SUPPORT || g.point(i) >= SUPPORT {
                    assert_eq!(*x, 0.0);
                }
            }
        }
    }

    #[test]
    fn lattice_members_are_grid_exact() {
        // indicators and steps on the lattice integrate exactly on any fine enough grid
        let spec = FamilySpec { kind: FamilyKind::Steps, count: 8 };
        for f in spec.sample(1, 1) {
            let coarse = f.evaluate(Grid::with_points(1024).unwrap()).integrate();
            let fine = f.evaluate(Grid::with_points(4096).unwrap()).integrate();
            assert!((coarse - fine).abs() <= 1e-12 * fine);
        }
    }
}
