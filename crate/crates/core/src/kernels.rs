//! Pointwise layer-potential kernels and the smooth factors multiplying
//! `-log r` in their local splits.
//!
//! `r_vec` always points from the source to the target. Laplace carries no
//! `1/2pi`, Helmholtz carries `i/4`, Stokes carries `1/4pi` and `1/pi`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Matrix2;
use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::{CurveJet, Vec2};
use crate::specfun::{bessel_j01, hankel1_01, EULER_GAMMA};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("source and target coincide; use the corrected rule for the diagonal")]
    Coincident,
    #[error("wavenumber {0} must be nonzero with Re >= 0 and Im >= 0")]
    BadWavenumber(Complex64),
}

/// Geometry of one source/target interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPair {
    pub r_vec: Vec2,
    pub r: f64,
    pub source_normal: Vec2,
    /// Zero for targets off the curve.
    pub target_normal: Vec2,
}

impl KernelPair {
    pub fn on_curve(source: &CurveJet, target: &CurveJet) -> Self {
        let r_vec = target.pos - source.pos;
        Self {
            r_vec,
            r: r_vec.norm(),
            source_normal: source.normal,
            target_normal: target.normal,
        }
    }

    pub fn to_point(source: &CurveJet, x: Vec2) -> Self {
        let r_vec = x - source.pos;
        Self {
            r_vec,
            r: r_vec.norm(),
            source_normal: source.normal,
            target_normal: Vec2::zeros(),
        }
    }

    fn nonzero(&self) -> Result<(), KernelError> {
        if self.r > 0.0 {
            Ok(())
        } else {
            Err(KernelError::Coincident)
        }
    }
}

/// Wavenumber and the constant `c_gamma = pi i/2 - (log(kappa/2) + gamma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelmholtzConstants {
    kappa: Complex64,
    c_gamma: Complex64,
}

impl HelmholtzConstants {
    pub fn new(kappa: Complex64) -> Result<Self, KernelError> {
        if !(kappa.norm() > 0.0 && kappa.re >= 0.0 && kappa.im >= 0.0) || !kappa.is_finite() {
            return Err(KernelError::BadWavenumber(kappa));
        }
        let c_gamma = Complex64::new(0.0, FRAC_PI_2) - ((kappa / 2.0).ln() + EULER_GAMMA);
        Ok(Self { kappa, c_gamma })
    }

    pub fn kappa(&self) -> Complex64 {
        self.kappa
    }

    pub fn c_gamma(&self) -> Complex64 {
        self.c_gamma
    }
}

/// `-log r`.
pub fn laplace_slp(pair: &KernelPair) -> Result<f64, KernelError> {
    pair.nonzero()?;
    Ok(-pair.r.ln())
}

/// `(i/4) H_0(kappa r)`.
pub fn helmholtz_s(pair: &KernelPair, c: &HelmholtzConstants) -> Result<Complex64, KernelError> {
    pair.nonzero()?;
    let (h0, _) = hankel1_01(c.kappa * pair.r);
    Ok(Complex64::new(0.0, 0.25) * h0)
}

/// `(i kappa/4) H_1(kappa r) (r . n_source) / r`.
pub fn helmholtz_d(pair: &KernelPair, c: &HelmholtzConstants) -> Result<Complex64, KernelError> {
    pair.nonzero()?;
    let (_, h1) = hankel1_01(c.kappa * pair.r);
    Ok(Complex64::new(0.0, 0.25) * c.kappa * h1 * pair.r_vec.dot(&pair.source_normal) / pair.r)
}

/// `-(i kappa/4) H_1(kappa r) (r . n_target) / r`.
pub fn helmholtz_dstar(
    pair: &KernelPair,
    c: &HelmholtzConstants,
) -> Result<Complex64, KernelError> {
    pair.nonzero()?;
    let (_, h1) = hankel1_01(c.kappa * pair.r);
    Ok(-Complex64::new(0.0, 0.25) * c.kappa * h1 * pair.r_vec.dot(&pair.target_normal) / pair.r)
}

/// `J_0(kappa r) taut / 2pi`; equals `taut / 2pi` at `r = 0`.
pub fn smooth_factor_s(pair: &KernelPair, c: &HelmholtzConstants, taut: f64) -> Complex64 {
    let (j0, _) = bessel_j01(c.kappa * pair.r);
    j0 * taut / (2.0 * PI)
}

/// `kappa J_1(kappa r) (r . n_source) / (2 pi r) taut`; zero at `r = 0`.
pub fn smooth_factor_d(pair: &KernelPair, c: &HelmholtzConstants, taut: f64) -> Complex64 {
    if pair.r == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let (_, j1) = bessel_j01(c.kappa * pair.r);
    c.kappa * j1 * pair.r_vec.dot(&pair.source_normal) / (2.0 * PI * pair.r) * taut
}

/// `-kappa J_1(kappa r) (r . n_target) / (2 pi r) taut`; zero at `r = 0`.
pub fn smooth_factor_dstar(pair: &KernelPair, c: &HelmholtzConstants, taut: f64) -> Complex64 {
    if pair.r == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let (_, j1) = bessel_j01(c.kappa * pair.r);
    -c.kappa * j1 * pair.r_vec.dot(&pair.target_normal) / (2.0 * PI * pair.r) * taut
}

/// All Helmholtz kernels and unit-density smooth factors of one pair, from a
/// single Bessel/Hankel evaluation. Requires `r > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelmholtzValues {
    pub s: Complex64,
    pub d: Complex64,
    pub dstar: Complex64,
    pub factor_s: Complex64,
    pub factor_d: Complex64,
    pub factor_dstar: Complex64,
}

pub fn helmholtz_values(pair: &KernelPair, c: &HelmholtzConstants) -> HelmholtzValues {
    let z = c.kappa * pair.r;
    let (h0, h1) = hankel1_01(z);
    let (j0, j1) = bessel_j01(z);
    let quarter_i = Complex64::new(0.0, 0.25);
    let rn_src = pair.r_vec.dot(&pair.source_normal) / pair.r;
    let rn_tgt = pair.r_vec.dot(&pair.target_normal) / pair.r;
    let two_pi = 2.0 * PI;
    HelmholtzValues {
        s: quarter_i * h0,
        d: quarter_i * c.kappa * h1 * rn_src,
        dstar: -quarter_i * c.kappa * h1 * rn_tgt,
        factor_s: j0 / two_pi,
        factor_d: c.kappa * j1 * rn_src / two_pi,
        factor_dstar: -c.kappa * j1 * rn_tgt / two_pi,
    }
}

/// Stokes single- and double-layer tensors
/// `S = (-log r I + r r^T / r^2) / 4pi` and `D = (r . n_source / r^2) r r^T / (pi r^2)`.
pub fn stokes_kernels(pair: &KernelPair) -> Result<(Matrix2<f64>, Matrix2<f64>), KernelError> {
    pair.nonzero()?;
    let r2 = pair.r * pair.r;
    let rr = pair.r_vec * pair.r_vec.transpose() / r2;
    let s = (Matrix2::identity() * (-pair.r.ln()) + rr) / (4.0 * PI);
    let d = rr * (pair.r_vec.dot(&pair.source_normal) / (PI * r2));
    Ok((s, d))
}

/// Coincident-point limits `(t t^T, (-curvature/2) t t^T / pi)` of `r r^T / r^2`
/// and of the double-layer tensor.
pub fn stokes_diagonal_limits(jet: &CurveJet) -> (Matrix2<f64>, Matrix2<f64>) {
    let t = jet.tangent();
    let tt = t * t.transpose();
    (tt, tt * (-0.5 * jet.curvature / PI))
}
