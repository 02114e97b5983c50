//! Uniform discretization of `[-L, L)`, sampled functions on it, rectangle-rule
//! quadrature, interval averages from prefix sums, and the discrete Fourier
//! transform with the `e^{-2 pi i x xi}` convention.
//!
//! Sample `i` is the value of a function on the cell `[x_i, x_i + h)` where
//! `x_i = -L + i h`. Operators that return point values (the maximal operator)
//! report them at the cell's left edge `x_i`; convolution-type operators are
//! translation equivariant and keep the sample's own position.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("half length must be positive and finite, got {0}")]
    BadHalfLength(f64),
    #[error("sample count {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("interval [{start}, {end}) is empty or outside 0..={n}")]
    BadInterval { start: usize, end: usize, n: usize },
    #[error("spectral transform needs a periodic function; re-tag after windowing")]
    NotPeriodic,
    #[error("functions live on different grids")]
    GridMismatch,
}

/// Uniform grid on `[-L, L)` with `N` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    half_length: f64,
    n: usize,
}

impl Grid {
    pub const DESK_HALF_LENGTH: f64 = 8.0;
    pub const DESK_POINTS: usize = 4096;

    pub fn new(half_length: f64, n: usize) -> Result<Self, GridError> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(GridError::BadHalfLength(half_length));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(GridError::NotPowerOfTwo(n));
        }
        Ok(Self { half_length, n })
    }

    /// `L = 8`, `N = 4096`.
    pub fn desk() -> Self {
        Self { half_length: Self::DESK_HALF_LENGTH, n: Self::DESK_POINTS }
    }

    pub fn with_points(n: usize) -> Result<Self, GridError> {
        Self::new(Self::DESK_HALF_LENGTH, n)
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    /// Left edge of cell `i`.
    pub fn point(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.spacing()
    }

    pub fn center(&self, i: usize) -> f64 {
        self.point(i) + 0.5 * self.spacing()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.point(i))
    }

    /// Same domain, twice the resolution.
    pub fn refined(&self) -> Self {
        Self { half_length: self.half_length, n: 2 * self.n }
    }

    /// `xi_k = k / (2L)`.
    pub fn frequency(&self, k: i64) -> f64 {
        k as f64 / (2.0 * self.half_length)
    }

    pub fn interval(&self, start: usize, end: usize) -> Result<Interval, GridError> {
        if start >= end || end > self.n {
            return Err(GridError::BadInterval { start, end, n: self.n });
        }
        Ok(Interval { start, end })
    }

    pub fn full(&self) -> Interval {
        Interval { start: 0, end: self.n }
    }

    /// Cells covering `[-L/2, L/2)`, the region where operator output is trusted.
    pub fn inner_window(&self) -> Interval {
        Interval { start: self.n / 4, end: 3 * self.n / 4 }
    }

    /// Smallest run of cells covering `[a, b)`, clamped to the domain.
    pub fn covering(&self, a: f64, b: f64) -> Result<Interval, GridError> {
        let h = self.spacing();
        let lo = ((a + self.half_length) / h + 1e-9).floor().max(0.0) as usize;
        let hi = ((b + self.half_length) / h - 1e-9).ceil().max(0.0) as usize;
        self.interval(lo.min(self.n), hi.min(self.n))
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[-{}, {}) / {}", self.half_length, self.half_length, self.n)
    }
}

/// Half-open run of cells `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval {
    start: usize,
    end: usize,
}

impl Interval {
    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn cells(&self) -> usize {
        self.end - self.start
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }

    pub fn length(&self, grid: &Grid) -> f64 {
        self.cells() as f64 * grid.spacing()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extension {
    /// Compactly supported; zero outside the domain.
    ZeroPadded,
    /// One period of a `2L`-periodic function.
    Periodic,
}

/// Scalar type a sampled function may carry.
pub trait Sample:
    Copy
    + Send
    + Sync
    + PartialEq
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + 'static
{
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    /// Real samples keep the real part.
    fn from_complex(z: Complex64) -> Self;
    fn modulus(self) -> f64;
    fn to_complex(self) -> Complex64;
    fn scale(self, c: f64) -> Self;
    fn is_finite_sample(self) -> bool;
}

impl Sample for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn from_complex(z: Complex64) -> Self {
        z.re
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn scale(self, c: f64) -> Self {
        self * c
    }
    fn is_finite_sample(self) -> bool {
        self.is_finite()
    }
}

impl Sample for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn from_complex(z: Complex64) -> Self {
        z
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn to_complex(self) -> Complex64 {
        self
    }
    fn scale(self, c: f64) -> Self {
        self * c
    }
    fn is_finite_sample(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Samples of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction<T: Sample = f64> {
    grid: Grid,
    samples: Vec<T>,
    extension: Extension,
}

pub type RealFunction = SampledFunction<f64>;
pub type ComplexFunction = SampledFunction<Complex64>;

impl<T: Sample> SampledFunction<T> {
    pub fn new(grid: Grid, samples: Vec<T>, extension: Extension) -> Result<Self, GridError> {
        if samples.len() != grid.len() {
            return Err(GridError::LengthMismatch { expected: grid.len(), got: samples.len() });
        }
        Ok(Self { grid, samples, extension })
    }

    pub fn zeros(grid: Grid, extension: Extension) -> Self {
        Self { grid, samples: vec![T::zero(); grid.len()], extension }
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(grid: Grid, extension: Extension, f: impl Fn(f64) -> T) -> Self {
        let samples = (0..grid.len()).map(|i| f(grid.center(i))).collect();
        Self { grid, samples, extension }
    }

    /// Samples `f` at the grid points `x_i`.
    pub fn from_fn_at_points(grid: Grid, extension: Extension, f: impl Fn(f64) -> T) -> Self {
        let samples = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self { grid, samples, extension }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [T] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    pub fn with_extension(mut self, extension: Extension) -> Self {
        self.extension = extension;
        self
    }

    pub fn map<U: Sample>(&self, f: impl Fn(T) -> U) -> SampledFunction<U> {
        SampledFunction {
            grid: self.grid,
            samples: self.samples.iter().map(|&v| f(v)).collect(),
            extension: self.extension,
        }
    }

    pub fn zip_with<U: Sample, V: Sample>(
        &self,
        other: &SampledFunction<U>,
        f: impl Fn(T, U) -> V,
    ) -> Result<SampledFunction<V>, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        Ok(SampledFunction {
            grid: self.grid,
            samples: self.samples.iter().zip(&other.samples).map(|(&a, &b)| f(a, b)).collect(),
            extension: self.extension,
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| v.scale(c))
    }

    pub fn abs(&self) -> RealFunction {
        self.map(|v| v.modulus())
    }

    pub fn to_complex(&self) -> ComplexFunction {
        self.map(|v| v.to_complex())
    }

    pub fn max_modulus(&self) -> f64 {
        self.samples.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|v| v.modulus() == 0.0)
    }

    pub fn all_finite(&self) -> bool {
        self.samples.iter().all(|v| v.is_finite_sample())
    }

    /// Rectangle rule `h * sum(samples)`.
    pub fn integrate(&self) -> T {
        let mut re = CompensatedSum::default();
        let mut im = CompensatedSum::default();
        for v in &self.samples {
            let z = v.to_complex();
            re.add(z.re);
            im.add(z.im);
        }
        let h = self.grid.spacing();
        T::from_complex(Complex64::new(re.value() * h, im.value() * h))
    }

    /// `h * sum` over one interval.
    pub fn integrate_over(&self, q: Interval) -> T {
        let mut acc = T::zero();
        for v in &self.samples[q.range()] {
            acc = acc + *v;
        }
        acc.scale(self.grid.spacing())
    }
}

impl RealFunction {
    /// Cell averages of `chi_[a, b)`: exact 0/1 for grid-aligned endpoints.
    pub fn indicator(grid: Grid, a: f64, b: f64) -> Self {
        let h = grid.spacing();
        Self::from_fn_at_points(grid, Extension::ZeroPadded, |x| {
            let lo = x.max(a);
            let hi = (x + h).min(b);
            if hi <= lo {
                0.0
            } else {
                ((hi - lo) / h).min(1.0)
            }
        })
    }

    /// Indicator of a set of cells.
    pub fn indicator_of(grid: Grid, q: Interval) -> Self {
        let mut f = Self::zeros(grid, Extension::ZeroPadded);
        for v in &mut f.samples[q.range()] {
            *v = 1.0;
        }
        f
    }

    pub fn constant(grid: Grid, c: f64, extension: Extension) -> Self {
        Self { grid, samples: vec![c; grid.len()], extension }
    }
}

impl ComplexFunction {
    pub fn real_part(&self) -> RealFunction {
        self.map(|z| z.re)
    }

    pub fn imag_part(&self) -> RealFunction {
        self.map(|z| z.im)
    }
}

/// Neumaier summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Prefix sums of cell values stored as unevaluated pairs `hi + lo`, so that
/// differences over short intervals do not lose the low-order bits.
#[derive(Debug, Clone)]
pub struct PrefixSums {
    hi: Vec<f64>,
    lo: Vec<f64>,
}

impl PrefixSums {
    pub fn new(values: &[f64]) -> Self {
        let mut hi = Vec::with_capacity(values.len() + 1);
        let mut lo = Vec::with_capacity(values.len() + 1);
        hi.push(0.0);
        lo.push(0.0);
        let mut acc = CompensatedSum::default();
        for &v in values {
            acc.add(v);
            hi.push(acc.sum);
            lo.push(acc.carry);
        }
        Self { hi, lo }
    }

    pub fn len(&self) -> usize {
        self.hi.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sum of values in `[a, b)`.
    #[inline]
    pub fn sum(&self, a: usize, b: usize) -> f64 {
        (self.hi[b] - self.hi[a]) + (self.lo[b] - self.lo[a])
    }

    #[inline]
    pub fn mean(&self, a: usize, b: usize) -> f64 {
        self.sum(a, b) / (b - a) as f64
    }

    pub fn total(&self) -> f64 {
        self.sum(0, self.len())
    }
}

/// `(1/|Q|) * integral over Q`, rebuilding prefix sums each call. Callers that
/// query many intervals should hold on to a [`PrefixSums`].
pub fn average(f: &RealFunction, q: Interval) -> Result<f64, GridError> {
    if q.cells() == 0 || q.end() > f.grid().len() {
        return Err(GridError::BadInterval { start: q.start(), end: q.end(), n: f.grid().len() });
    }
    Ok(PrefixSums::new(f.samples()).mean(q.start(), q.end()))
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Unnormalized in-place forward DFT `sum_j a_j e^{-2 pi i jk/n}`.
pub(crate) fn dft_forward(buf: &mut [Complex64]) {
    plan(buf.len(), false).process(buf);
}

/// Unnormalized in-place inverse DFT.
pub(crate) fn dft_inverse(buf: &mut [Complex64]) {
    plan(buf.len(), true).process(buf);
}

/// Fourier coefficients `F(xi_k)` for `k in [-N/2, N/2)`, stored in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn wavenumbers(&self) -> impl Iterator<Item = i64> {
        let half = (self.grid.len() / 2) as i64;
        -half..half
    }

    /// Coefficient at wavenumber `k`; `None` outside `[-N/2, N/2)`.
    pub fn coefficient(&self, k: i64) -> Option<Complex64> {
        let idx = k + (self.grid.len() / 2) as i64;
        self.coeffs.get(usize::try_from(idx).ok()?).copied()
    }

    /// Multiply every coefficient by `m(xi_k)`.
    pub fn apply(&mut self, m: impl Fn(f64) -> Complex64) {
        let half = (self.grid.len() / 2) as i64;
        for (j, c) in self.coeffs.iter_mut().enumerate() {
            *c *= m(self.grid.frequency(j as i64 - half));
        }
    }
}

/// `F_k = h (-1)^k DFT_k(f)`, the rectangle-rule approximation of
/// `integral f(x) e^{-2 pi i x xi_k} dx` over one period.
pub fn spectral_transform<T: Sample>(f: &SampledFunction<T>) -> Result<Spectrum, GridError> {
    if f.extension() != Extension::Periodic {
        return Err(GridError::NotPeriodic);
    }
    let grid = *f.grid();
    let n = grid.len();
    let mut buf: Vec<Complex64> = f.samples().iter().map(|v| v.to_complex()).collect();
    dft_forward(&mut buf);
    let h = grid.spacing();
    let half = n / 2;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for (j, c) in coeffs.iter_mut().enumerate() {
        // centered index j <-> wavenumber k = j - N/2 <-> DFT bin (k mod N)
        let bin = (j + half) % n;
        let sign = if (j + half) % 2 == 0 { 1.0 } else { -1.0 };
        *c = buf[bin] * (h * sign);
    }
    Ok(Spectrum { grid, coeffs })
}

/// `f(x_j) = (1/2L) sum_k F_k e^{2 pi i xi_k x_j}`.
pub fn inverse_spectral_transform(spectrum: &Spectrum) -> ComplexFunction {
    let grid = spectrum.grid;
    let n = grid.len();
    let half = n / 2;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (j, c) in spectrum.coeffs.iter().enumerate() {
        let bin = (j + half) % n;
        let sign = if (j + half) % 2 == 0 { 1.0 } else { -1.0 };
        buf[bin] = *c * sign;
    }
    dft_inverse(&mut buf);
    let scale = 1.0 / (2.0 * grid.half_length());
    for v in &mut buf {
        *v *= scale;
    }
    SampledFunction { grid, samples: buf, extension: Extension::Periodic }
}
