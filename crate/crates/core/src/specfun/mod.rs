//! Special functions: gamma, Riemann zeta (real and complex argument), the
//! derivatives of zeta at the trivial zeros, and Bessel/Hankel functions of
//! orders 0 and 1 with complex argument.
//!
//! Everything here is a pure function of its inputs.

mod bessel;
mod gamma;
mod zeta;

pub use bessel::{bessel_j, bessel_j01, hankel1, hankel1_01, BesselOrder, SERIES_RADIUS};
pub use gamma::{gamma, gamma_complex};
pub use zeta::{
    zeta, zeta_complex, zeta_deriv_complex_step, zeta_deriv_neg_even,
    zeta_deriv_neg_even_closed_form, COMPLEX_STEP,
};

use num_complex::Complex64;
use thiserror::Error;

/// Complex scalar used throughout the crate (wavenumbers, Helmholtz kernels).
pub type ComplexScalar = Complex64;

/// Euler's constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecFunError {
    #[error("{function}: argument {arg} is outside the supported domain ({reason})")]
    Domain {
        function: &'static str,
        arg: String,
        reason: &'static str,
    },
    #[error("{function}: pole at {arg}")]
    Pole { function: &'static str, arg: String },
    #[error("{function}: index {index} exceeds the supported maximum {max}")]
    UnsupportedRange {
        function: &'static str,
        index: usize,
        max: usize,
    },
    #[error(
        "zeta'(-{k2}) closed form {closed} and complex-step value {stepped} disagree (rel. {rel:e})",
        k2 = 2 * .k
    )]
    Inconsistent {
        k: usize,
        closed: f64,
        stepped: f64,
        rel: f64,
    },
}

/// `sin(pi x)`, exact at the integers and half-integers.
pub(crate) fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (x / 2.0).round();
    // r in [-1, 1]
    let (sign, r) = if r < 0.0 { (-1.0, -r) } else { (1.0, r) };
    let r = if r > 0.5 { 1.0 - r } else { r };
    sign * if r == 0.0 {
        0.0
    } else if r <= 0.25 {
        (std::f64::consts::PI * r).sin()
    } else {
        (std::f64::consts::PI * (0.5 - r)).cos()
    }
}

/// `cos(pi x)`, exact at the integers and half-integers.
pub(crate) fn cos_pi(x: f64) -> f64 {
    sin_pi(x + 0.5)
}

/// `sin(pi z)` for complex `z`.
pub(crate) fn sin_pi_complex(z: Complex64) -> Complex64 {
    let b = std::f64::consts::PI * z.im;
    Complex64::new(sin_pi(z.re) * b.cosh(), cos_pi(z.re) * b.sinh())
}
