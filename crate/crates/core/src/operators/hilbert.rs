//! Hilbert transform with multiplier `-i sgn(xi)`, i.e. kernel `1/(pi (x - t))`,
//! and the modulated transforms built from it.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::grid::{
    dft_forward, dft_inverse, inverse_spectral_transform, spectral_transform, ComplexFunction,
    Extension, Grid, Sample, SampledFunction,
};

/// How many periods of padding a zero-padded input gets before the spectral
/// transform, so that its periodization stays far from the trusted window.
pub const SPECTRAL_PADDING: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HilbertBackend {
    /// Sharp DFT multiplier. The Nyquist bin is sent to zero so real input stays real.
    Spectral,
    /// Principal-value sum `(1/pi) sum_{k >= 1} (f_{i-k} - f_{i+k}) / k`.
    PvQuadrature,
}

impl HilbertBackend {
    /// Spectral for periodic input, principal-value quadrature otherwise.
    pub fn natural_for(extension: Extension) -> Self {
        match extension {
            Extension::Periodic => Self::Spectral,
            Extension::ZeroPadded => Self::PvQuadrature,
        }
    }
}

fn sgn_multiplier(k: i64, n: usize) -> Complex64 {
    if k == 0 || k == -(n as i64 / 2) {
        Complex64::new(0.0, 0.0)
    } else if k > 0 {
        Complex64::new(0.0, -1.0)
    } else {
        Complex64::new(0.0, 1.0)
    }
}

pub fn hilbert<T: Sample>(f: &SampledFunction<T>, backend: HilbertBackend) -> SampledFunction<T> {
    let out = match backend {
        HilbertBackend::Spectral => spectral(f),
        HilbertBackend::PvQuadrature => pv_quadrature(f),
    };
    SampledFunction::new(*f.grid(), out.into_iter().map(T::from_complex).collect(), f.extension())
        .expect("length preserved")
}

fn spectral<T: Sample>(f: &SampledFunction<T>) -> Vec<Complex64> {
    let grid = *f.grid();
    let n = grid.len();
    match f.extension() {
        Extension::Periodic => {
            let mut s = spectral_transform(f).expect("periodic input");
            let half = (n / 2) as i64;
            for (j, c) in s.coefficients_mut().iter_mut().enumerate() {
                *c *= sgn_multiplier(j as i64 - half, n);
            }
            inverse_spectral_transform(&s).into_samples()
        }
        Extension::ZeroPadded => {
            // embed in a longer period with the same spacing
            let big = n * SPECTRAL_PADDING;
            let offset = (big - n) / 2;
            let mut buf = vec![Complex64::new(0.0, 0.0); big];
            for (i, v) in f.samples().iter().enumerate() {
                buf[offset + i] = v.to_complex();
            }
            dft_forward(&mut buf);
            for (bin, c) in buf.iter_mut().enumerate() {
                let k = if bin < big / 2 { bin as i64 } else { bin as i64 - big as i64 };
                *c *= sgn_multiplier(k, big) / big as f64;
            }
            dft_inverse(&mut buf);
            buf[offset..offset + n].to_vec()
        }
    }
}

/// `c_d = 1/(pi d)` for `d != 0`, `c_0 = 0`.
fn pv_kernel(d: i64) -> f64 {
    if d == 0 {
        0.0
    } else {
        1.0 / (PI * d as f64)
    }
}

/// Linear convolution with the truncated pv kernel through a `4N` FFT.
fn pv_quadrature<T: Sample>(f: &SampledFunction<T>) -> Vec<Complex64> {
    let n = f.grid().len();
    let m = 4 * n;
    let mut a = vec![Complex64::new(0.0, 0.0); m];
    for (i, v) in f.samples().iter().enumerate() {
        a[i] = v.to_complex();
    }
    let mut k = vec![Complex64::new(0.0, 0.0); m];
    for d in -(n as i64 - 1)..n as i64 {
        k[d.rem_euclid(m as i64) as usize] = Complex64::new(pv_kernel(d), 0.0);
    }
    dft_forward(&mut a);
    dft_forward(&mut k);
    for (x, y) in a.iter_mut().zip(&k) {
        *x *= *y / m as f64;
    }
    dft_inverse(&mut a);
    a.truncate(n);
    a
}

/// Direct O(N^2) principal-value sum, kept as the oracle for the FFT path.
pub fn pv_quadrature_direct(values: &[f64]) -> Vec<f64> {
    let n = values.len() as i64;
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| values[j as usize] * pv_kernel(i - j))
                .sum()
        })
        .collect()
}

/// `H_r f = (f + i e^{2 pi i r x} H(e^{-2 pi i r x} f)) / 2`, the projection onto
/// frequencies above `r` (weight one half exactly at `r`).
pub fn modulated_hilbert<T: Sample>(
    f: &SampledFunction<T>,
    r: f64,
    backend: HilbertBackend,
) -> ComplexFunction {
    let grid = *f.grid();
    let phase = |i: usize, sign: f64| Complex64::from_polar(1.0, sign * 2.0 * PI * r * grid.point(i));
    let demodulated = SampledFunction::new(
        grid,
        f.samples().iter().enumerate().map(|(i, v)| v.to_complex() * phase(i, -1.0)).collect(),
        f.extension(),
    )
    .expect("length preserved");
    let h = hilbert(&demodulated, backend);
    let i_unit = Complex64::new(0.0, 1.0);
    let samples = f
        .samples()
        .iter()
        .zip(h.samples())
        .enumerate()
        .map(|(i, (v, hv))| 0.5 * (v.to_complex() + i_unit * phase(i, 1.0) * hv))
        .collect();
    SampledFunction::new(grid, samples, f.extension()).expect("length preserved")
}

/// `H_{t,s}(f, g) = H_t f * H_s g`.
pub fn bilinear_hts<T: Sample, U: Sample>(
    f: &SampledFunction<T>,
    g: &SampledFunction<U>,
    t: f64,
    s: f64,
    backend: HilbertBackend,
) -> ComplexFunction {
    let a = modulated_hilbert(f, t, backend);
    let b = modulated_hilbert(g, s, backend);
    a.zip_with(&b, |x, y| x * y).expect("same grid")
}

/// Analytic signal test helper: `sum_k c_k e^{2 pi i xi_k x}` sampled at grid points.
pub fn trigonometric(grid: Grid, terms: &[(i64, Complex64)]) -> ComplexFunction {
    ComplexFunction::from_fn_at_points(grid, Extension::Periodic, |x| {
        terms
            .iter()
            .map(|&(k, c)| c * Complex64::from_polar(1.0, 2.0 * PI * grid.frequency(k) * x))
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RealFunction;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn indicator_hilbert(x: f64, a: f64, b: f64) -> f64 {
        ((x - a) / (x - b)).abs().ln() / PI
    }

    #[test]
    fn cosine_goes_to_sine() {
        let g = Grid::desk();
        for k in [1, 5, 300] {
            let xi = g.frequency(k);
            let f = RealFunction::from_fn_at_points(g, Extension::Periodic, |x| (2.0 * PI * xi * x).cos());
            let hf = hilbert(&f, HilbertBackend::Spectral);
            for (i, v) in hf.samples().iter().enumerate() {
                let expect = (2.0 * PI * xi * g.point(i)).sin();
                assert!((v - expect).abs() < 1e-12, "k={k} i={i}");
            }
        }
    }

    #[test]
    fn hilbert_squared_is_minus_identity_off_zero_frequency() {
        let g = Grid::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let terms: Vec<(i64, Complex64)> = (-2047i64..2048)
            .filter(|&k| k != 0)
            .map(|k| (k, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) / (1.0 + k.abs() as f64)))
            .collect();
        let f = trigonometric(g, &terms).map(|z| z + Complex64::new(0.7, 0.0));
        let mean = f.integrate() / (2.0 * g.half_length());
        let hh = hilbert(&hilbert(&f, HilbertBackend::Spectral), HilbertBackend::Spectral);
        let scale = f.max_modulus();
        for (a, b) in hh.samples().iter().zip(f.samples()) {
            assert!((a - (mean - b)).norm() < 1e-12 * scale);
        }
    }

    #[test]
    fn fft_pv_matches_direct_sum() {
        let g = Grid::with_points(512).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v: Vec<f64> = (0..512).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = RealFunction::new(g, v.clone(), Extension::ZeroPadded).unwrap();
        let fast = hilbert(&f, HilbertBackend::PvQuadrature);
        let slow = pv_quadrature_direct(&v);
        for (a, b) in fast.samples().iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn indicator_matches_log_formula() {
        let g = Grid::desk();
        let h = g.spacing();
        let f = RealFunction::indicator(g, -1.0, 1.0);
        for backend in [HilbertBackend::PvQuadrature] {
            let hf = hilbert(&f, backend);
            for i in g.inner_window().range() {
                let c = g.center(i);
                if (c.abs() - 1.0).abs() <= 4.0 * h {
                    continue;
                }
                let exact = indicator_hilbert(c, -1.0, 1.0);
                let got = hf.samples()[i];
                assert!((got - exact).abs() <= 1e-2 * exact.abs(), "{backend:?} x={c} {got} {exact}");
            }
        }
    }

    #[test]
    fn riesz_projection_of_analytic_signals() {
        let g = Grid::with_points(1024).unwrap();
        let pos = trigonometric(g, &[(3, Complex64::new(1.0, 0.5)), (40, Complex64::new(-0.2, 1.0))]);
        let neg = trigonometric(g, &[(-3, Complex64::new(1.0, 0.5)), (-17, Complex64::new(0.0, 2.0))]);
        let p = modulated_hilbert(&pos, 0.0, HilbertBackend::Spectral);
        let q = modulated_hilbert(&neg, 0.0, HilbertBackend::Spectral);
        for i in 0..g.len() {
            assert!((p.samples()[i] - pos.samples()[i]).norm() < 1e-12);
            assert!(q.samples()[i].norm() < 1e-12);
        }
        // shifting the cut past the lowest mode removes it
        let shifted = modulated_hilbert(&pos, g.frequency(10), HilbertBackend::Spectral);
        let high = trigonometric(g, &[(40, Complex64::new(-0.2, 1.0))]);
        for i in 0..g.len() {
            assert!((shifted.samples()[i] - high.samples()[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn modulated_is_linear_and_hts_multiplies_moduli() {
        let g = Grid::with_points(512).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut rand_fn = || {
            RealFunction::new(g, (0..512).map(|_| rng.gen_range(-1.0..1.0)).collect(), Extension::ZeroPadded).unwrap()
        };
        let f = rand_fn();
        let k = rand_fn();
        let (a, b) = (1.5, -0.25);
        let comb = f.zip_with(&k, |x, y| a * x + b * y).unwrap();
        let r = 0.37;
        for backend in [HilbertBackend::Spectral, HilbertBackend::PvQuadrature] {
            let lhs = modulated_hilbert(&comb, r, backend);
            let hf = modulated_hilbert(&f, r, backend);
            let hk = modulated_hilbert(&k, r, backend);
            for i in 0..512 {
                let rhs = hf.samples()[i] * a + hk.samples()[i] * b;
                assert!((lhs.samples()[i] - rhs).norm() < 1e-12);
            }
            let p = bilinear_hts(&f, &k, r, -r, backend);
            let hk2 = modulated_hilbert(&k, -r, backend);
            for i in 0..512 {
                let expect = hf.samples()[i].norm() * hk2.samples()[i].norm();
                assert!((p.samples()[i].norm() - expect).abs() < 1e-12);
            }
            let zero = RealFunction::zeros(g, Extension::ZeroPadded);
            assert!(bilinear_hts(&f, &zero, r, r, backend).is_zero());
        }
    }

    #[test]
    fn hts_of_analytic_signals_is_the_product() {
        let g = Grid::with_points(1024).unwrap();
        let f = trigonometric(g, &[(2, Complex64::new(1.0, 0.0)), (9, Complex64::new(0.0, 1.0))]);
        let k = trigonometric(g, &[(5, Complex64::new(0.5, -0.5))]);
        let p = bilinear_hts(&f, &k, 0.0, 0.0, HilbertBackend::Spectral);
        for i in 0..g.len() {
            assert!((p.samples()[i] - f.samples()[i] * k.samples()[i]).norm() < 1e-12);
        }
    }
}
