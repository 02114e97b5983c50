//! Numerical laboratory for weighted restricted weak-type inequalities on the line.
//!
//! Functions live on a uniform grid of `[-L, L)`. The crate provides the
//! maximal, Hilbert, modulated Hilbert and bilinear multiplier operators,
//! weighted Lorentz quasi-norms, estimators for the usual weight constants,
//! the Rubio de Francia iteration, and an experiment harness that measures both
//! sides of the inequalities.

pub mod grid;
pub mod harness;
pub mod lorentz;
pub mod operators;
pub mod rdf;
pub mod weights;

pub use rustfft::num_complex::Complex64;
