//! Converged correction weights for `-log|x|` and `|x|^-z` singularities, and
//! a finite-h moment-fitting oracle used to validate them.
//!
//! For the logarithm the weights solve `sum_j w_j j^(2k) = -zeta'(-2k)`, and for
//! `|x|^-z` they solve `sum_j w_j j^(2k) = -zeta(z - 2k)`, `k = 0..=K`.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hiprec::{self, BigReal, HiPrecError, Precision};
use crate::specfun::{self, SpecFunError};

/// Largest stencil half-width supported.
pub const MAX_K: usize = 20;
/// Relative residual accepted when the double weights are re-substituted.
pub const DOUBLE_RESIDUAL_BOUND: f64 = 1e-12;
const MAX_DOUBLINGS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeightsError {
    #[error("K = {0} exceeds the supported maximum {MAX_K}")]
    UnsupportedK(usize),
    #[error("exponent z = {0} must lie in (-1, 1)")]
    ExponentOutOfRange(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("double-precision residual {residual:e} at k = {k} exceeds {DOUBLE_RESIDUAL_BOUND:e}")]
    Residual { k: usize, residual: f64 },
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error(transparent)]
    HiPrec(#[from] HiPrecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SingularityKind {
    Log,
    Pow { z: f64 },
}

/// Symmetric correction weights `w_0..w_K`; `w_j` applies at both `+jh` and
/// `-jh` (so `w_0` enters twice at the singular node).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionStencil {
    k: usize,
    kind: SingularityKind,
    weights: Vec<f64>,
}

impl CorrectionStencil {
    pub fn half_width(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> SingularityKind {
        self.kind
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nominal convergence order: `2K + 2` for the logarithm and `2K + 3 - z`
    /// for `|x|^-z`.
    pub fn order(&self) -> f64 {
        match self.kind {
            SingularityKind::Log => (2 * self.k + 2) as f64,
            SingularityKind::Pow { z } => (2 * self.k + 3) as f64 - z,
        }
    }

    /// Moments `b_k` on the right-hand side of the defining system.
    pub fn moments(&self) -> Result<Vec<f64>, WeightsError> {
        moments(self.kind, self.k)
    }

    /// Worst componentwise relative residual of the double weights,
    /// `|sum_j w_j j^(2k) - b_k| / (sum_j |w_j j^(2k)| + |b_k|)`.
    pub fn residual(&self) -> Result<f64, WeightsError> {
        let b = self.moments()?;
        Ok(double_residual(&self.weights, &b).1)
    }
}

fn moments(kind: SingularityKind, k_max: usize) -> Result<Vec<f64>, WeightsError> {
    (0..=k_max)
        .map(|k| {
            Ok(match kind {
                SingularityKind::Log => -specfun::zeta_deriv_neg_even(k)?,
                SingularityKind::Pow { z } => -specfun::zeta(z - 2.0 * k as f64)?,
            })
        })
        .collect()
}

fn double_residual(w: &[f64], b: &[f64]) -> (usize, f64) {
    let mut worst = (0, 0.0f64);
    for (k, &bk) in b.iter().enumerate() {
        let mut sum = 0.0;
        let mut scale = bk.abs();
        for (j, &wj) in w.iter().enumerate() {
            let t = wj * ((j * j) as f64).powi(k as i32);
            sum += t;
            scale += t.abs();
        }
        let r = if scale == 0.0 {
            0.0
        } else {
            (sum - bk).abs() / scale
        };
        if r > worst.1 {
            worst = (k, r);
        }
    }
    worst
}

fn solve(kind: SingularityKind, k: usize) -> Result<CorrectionStencil, WeightsError> {
    let b = moments(kind, k)?;
    let nodes: Vec<f64> = (0..=k).map(|j| (j * j) as f64).collect();
    let start = hiprec::working_precision()?;
    let (weights, _) = hiprec::solve_dual_vandermonde_f64(&nodes, &b, start, MAX_DOUBLINGS)?;
    let (kw, residual) = double_residual(&weights, &b);
    if !(residual <= DOUBLE_RESIDUAL_BOUND) || weights.iter().any(|w| !w.is_finite()) {
        return Err(WeightsError::Residual { k: kw, residual });
    }
    Ok(CorrectionStencil { k, kind, weights })
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum CacheKey {
    Log(usize),
    Pow(usize, u64),
}

type Cache = RwLock<HashMap<CacheKey, CorrectionStencil>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

fn cached(
    key: CacheKey,
    build: impl FnOnce() -> Result<CorrectionStencil, WeightsError>,
) -> Result<CorrectionStencil, WeightsError> {
    if let Some(s) = cache().read().unwrap_or_else(|e| e.into_inner()).get(&key) {
        return Ok(s.clone());
    }
    let s = build()?;
    cache()
        .write()
        .unwrap_or_else(|e| e.into_inner())
        .entry(key)
        .or_insert_with(|| s.clone());
    Ok(s)
}

/// Stencil for `-log|x|` with half-width `K`, order `2K + 2`.
pub fn build_log_stencil(k: usize) -> Result<CorrectionStencil, WeightsError> {
    if k > MAX_K {
        return Err(WeightsError::UnsupportedK(k));
    }
    cached(CacheKey::Log(k), || solve(SingularityKind::Log, k))
}

/// Stencil for `|x|^-z`, `-1 < z < 1`, with half-width `K`.
pub fn build_pow_stencil(k: usize, z: f64) -> Result<CorrectionStencil, WeightsError> {
    if k > MAX_K {
        return Err(WeightsError::UnsupportedK(k));
    }
    if !(z > -1.0 && z < 1.0) {
        return Err(WeightsError::ExponentOutOfRange(z));
    }
    cached(CacheKey::Pow(k, z.to_bits()), || {
        solve(SingularityKind::Pow { z }, k)
    })
}

/// Cutoff `eta(x) = exp(-(x/b)^(2m))` used only by [`oracle_stencil`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSpec {
    pub half_width: f64,
    pub m: u32,
}

impl CutoffSpec {
    pub fn new(half_width: f64, m: u32) -> Result<Self, WeightsError> {
        if !(half_width > 0.0 && half_width.is_finite()) || m == 0 {
            return Err(WeightsError::InvalidInput(format!(
                "cutoff needs b > 0 and m >= 1, got b = {half_width}, m = {m}"
            )));
        }
        Ok(Self { half_width, m })
    }

    /// Cutoff with `2m = 2K + 4`, one order flatter than the minimum.
    pub fn for_stencil(half_width: f64, k: usize) -> Self {
        Self {
            half_width,
            m: k as u32 + 2,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (-(x / self.half_width).powi(2 * self.m as i32)).exp()
    }
}

/// Finite-h weights `w_j^h` of the moment system
/// `sum_j w_j^h j^(2k) eta(jh) = -int_0^inf x^(2k) log x eta(xh) dx + sum_n n^(2k) log n eta(nh)`.
///
/// The sum and integral cancel to `O(1)` from magnitudes near `(b/h)^(2K+1)`,
/// so both are evaluated with enough extra digits to absorb that loss.
pub fn oracle_stencil(k: usize, h: f64, cutoff: CutoffSpec) -> Result<Vec<f64>, WeightsError> {
    if k > MAX_K {
        return Err(WeightsError::UnsupportedK(k));
    }
    if (cutoff.m as usize) < k + 1 {
        return Err(WeightsError::InvalidInput(format!(
            "cutoff exponent 2m = {} is below 2K + 2 = {}",
            2 * cutoff.m,
            2 * k + 2
        )));
    }
    let ratio = cutoff.half_width / h;
    if !(h > 0.0) || !ratio.is_finite() || ratio < (4 * k).max(4) as f64 {
        return Err(WeightsError::InvalidInput(format!(
            "cutoff half-width {} holds {:.2} samples at h = {h}; need at least {}",
            cutoff.half_width,
            ratio,
            (4 * k).max(4)
        )));
    }

    let digits = 40 + ((2 * k + 1) as f64 * ratio.log10()).ceil() as u32;
    let p = Precision::digits(digits);
    let power = 2 * cutoff.m;
    let a_max = 2 * k as u32;
    let tail = tail_extent(power, a_max, digits);
    let (g, l) = scaled_moments(power, k, digits, p)?;

    // c = h / b, y = x c
    let c = BigReal::from_f64(h, p)? / BigReal::from_f64(cutoff.half_width, p)?;
    let log_c = c.ln();

    // S_k = sum_n n^(2k) ln n eta(n h)
    let n_max = (tail / (h / cutoff.half_width)).ceil() as i64 + 1;
    let mut s = vec![BigReal::zero(p); k + 1];
    for n in 2..=n_max {
        let nb = BigReal::from_i64(n, p);
        let eta = (-(&nb * &c).powi(power)).exp();
        let mut term = nb.ln() * eta;
        let n2 = &nb * &nb;
        for sk in s.iter_mut() {
            *sk = &*sk + &term;
            term = &term * &n2;
        }
    }

    let mut moments = Vec::with_capacity(k + 1);
    let mut c_pow = c.clone(); // c^(a+1)
    let c2 = &c * &c;
    for kk in 0..=k {
        let j = (&l[kk] - &(&log_c * &g[kk])) / &c_pow;
        moments.push(&s[kk] - &j);
        c_pow = &c_pow * &c2;
    }

    let nodes: Vec<BigReal> = (0..=k as i64)
        .map(|j| BigReal::from_i64(j * j, p))
        .collect();
    let v = hiprec::solve_dual_vandermonde(&nodes, &moments)?;
    Ok(v.iter()
        .enumerate()
        .map(|(j, vj)| vj.to_f64() / cutoff.eval(j as f64 * h))
        .collect())
}

/// Point `Y` beyond which `y^a exp(-y^p)` is below `10^-(digits + 10)`.
fn tail_extent(power: u32, a_max: u32, digits: u32) -> f64 {
    let target = (digits as f64 + 10.0) * std::f64::consts::LN_10;
    let mut y: f64 = 2.0;
    for _ in 0..50 {
        y = (target + a_max as f64 * y.ln().max(0.0)).powf(1.0 / power as f64);
    }
    y.max(1.0) * 1.05
}

/// `G_a = int_0^inf y^a exp(-y^p) dy` and `L_a = int_0^inf y^a log y exp(-y^p) dy`
/// for `a = 0, 2, .., 2K`. With `u = y^p` these are `Gamma(s)/p` and
/// `Gamma'(s)/p^2`, `s = (a+1)/p < 1`.
///
/// Both come from the lower incomplete gamma series at a cut `X` where the
/// upper tail is negligible:
/// `gamma(s, X) = X^s e^-X sum_n X^n / (s (s+1) .. (s+n))`, and its
/// s-derivative, whose terms carry the extra factor `ln X - sum_i 1/(s+i)`.
/// Every term of both sums is positive.
fn scaled_moments(
    power: u32,
    k: usize,
    digits: u32,
    p: Precision,
) -> Result<(Vec<BigReal>, Vec<BigReal>), WeightsError> {
    let cut = ((digits as f64 + 10.0) * std::f64::consts::LN_10 + 20.0).ceil();
    let x = BigReal::from_f64(cut, p)?;
    let log_x = x.ln();
    let exp_neg_x = (-x.clone()).exp();
    let pb = BigReal::from_i64(power as i64, p);
    let p2 = &pb * &pb;
    let eps = BigReal::parse_decimal(&format!("1e-{}", digits + 5), p)?;

    let mut g = Vec::with_capacity(k + 1);
    let mut l = Vec::with_capacity(k + 1);
    for kk in 0..=k {
        let s = BigReal::from_i64((2 * kk + 1) as i64, p) / &pb;
        let mut term = BigReal::one(p) / &s;
        let mut harmonic = term.clone();
        let mut sum = term.clone();
        let mut dsum = &term * &harmonic;
        let mut n = 0i64;
        loop {
            n += 1;
            let denom = &s + &BigReal::from_i64(n, p);
            term = &(&term * &x) / &denom;
            harmonic = &harmonic + &(BigReal::one(p) / &denom);
            let weighted = &term * &harmonic;
            sum = &sum + &term;
            dsum = &dsum + &weighted;
            if n as f64 > cut && weighted < &eps * &dsum {
                break;
            }
        }
        let prefactor = &(&s * &log_x).exp() * &exp_neg_x;
        let gamma = &prefactor * &sum;
        let dgamma = &(&log_x * &gamma) - &(&prefactor * &dsum);
        g.push(&gamma / &pb);
        l.push(&dgamma / &p2);
    }
    Ok((g, l))
}

/// Richardson extrapolation of [`oracle_stencil`] over `h, h/2, .., h/2^(levels-1)`,
/// eliminating error terms `h^(2m)`, `h^(4m)`, ...
pub fn oracle_extrapolated(
    k: usize,
    h: f64,
    cutoff: CutoffSpec,
    levels: usize,
) -> Result<Vec<f64>, WeightsError> {
    if levels == 0 {
        return Err(WeightsError::InvalidInput("need at least one level".into()));
    }
    let mut table: Vec<Vec<f64>> = (0..levels)
        .into_par_iter()
        .map(|i| oracle_stencil(k, h / f64::powi(2.0, i as i32), cutoff))
        .collect::<Result<_, _>>()?;
    let rate = 2 * cutoff.m as i32;
    for col in 1..levels {
        let factor = f64::powi(2.0, rate * col as i32);
        for i in (col..levels).rev() {
            let fine = &table[i];
            let coarse = &table[i - 1];
            let next: Vec<f64> = fine
                .iter()
                .zip(coarse)
                .map(|(f, c)| f + (f - c) / (factor - 1.0))
                .collect();
            table[i] = next;
        }
    }
    Ok(table.pop().expect("levels >= 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_k0_is_half_log_two_pi() {
        let s = build_log_stencil(0).unwrap();
        assert_relative_eq!(
            s.weights()[0],
            0.918_938_533_204_672_7,
            max_relative = 1e-15
        );
        assert_eq!(s.order(), 2.0);
    }

    #[test]
    fn log_k1_values() {
        let s = build_log_stencil(1).unwrap();
        assert_relative_eq!(s.weights()[0], 0.888_490_076_146_280, max_relative = 1e-14);
        assert_relative_eq!(s.weights()[1], 0.030_448_457_058_393, max_relative = 1e-13);
    }

    #[test]
    fn pow_k0_values() {
        let s = build_pow_stencil(0, 0.5).unwrap();
        assert_relative_eq!(s.weights()[0], 1.460_354_508_809_587, max_relative = 1e-14);
        assert_eq!(build_pow_stencil(0, 0.0).unwrap().weights()[0], 0.5);
        assert_relative_eq!(build_pow_stencil(2, 0.5).unwrap().order(), 6.5);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(
            build_log_stencil(21),
            Err(WeightsError::UnsupportedK(21))
        ));
        assert!(matches!(
            build_pow_stencil(1, 1.0),
            Err(WeightsError::ExponentOutOfRange(_))
        ));
        assert!(matches!(
            build_pow_stencil(1, -1.5),
            Err(WeightsError::ExponentOutOfRange(_))
        ));
        let cut = CutoffSpec::for_stencil(1.0, 3);
        assert!(matches!(
            oracle_stencil(3, 0.5, cut),
            Err(WeightsError::InvalidInput(_))
        ));
    }

    #[test]
    fn residuals_are_small() {
        for k in 0..=MAX_K {
            let s = build_log_stencil(k).unwrap();
            assert!(s.residual().unwrap() <= DOUBLE_RESIDUAL_BOUND, "K = {k}");
        }
    }

    #[test]
    fn oracle_k0_approaches_converged() {
        let cut = CutoffSpec::new(1.0, 2).unwrap();
        let w = oracle_stencil(0, 1.0 / 16.0, cut).unwrap();
        assert!((w[0] - 0.918_938_533_204_672_7).abs() < 1e-3);
    }

    #[test]
    fn gaussian_moments_match_closed_form() {
        let p = Precision::digits(80);
        let (g, l) = scaled_moments(2, 1, 80, p).unwrap();
        // int_0^inf e^(-y^2) = sqrt(pi)/2, int_0^inf y^2 e^(-y^2) = sqrt(pi)/4
        let root_pi = BigReal::pi(p).sqrt();
        let e0 = (&g[0] - &(&root_pi / &BigReal::from_i64(2, p)))
            .abs()
            .to_f64();
        let e1 = (&g[1] - &(&root_pi / &BigReal::from_i64(4, p)))
            .abs()
            .to_f64();
        assert!(e0 < 1e-70 && e1 < 1e-70, "{e0:e} {e1:e}");
        // int_0^inf log y e^(-y^2) = -sqrt(pi) (gamma + 2 ln 2) / 4
        let want =
            -1.772_453_850_905_516 * (0.577_215_664_901_532_9 + 2.0 * std::f64::consts::LN_2) / 4.0;
        assert!((l[0].to_f64() - want).abs() < 1e-15);
    }

    #[test]
    fn cutoff_is_flat_at_zero() {
        let cut = CutoffSpec::for_stencil(1.0, 3);
        assert_eq!(cut.eval(0.0), 1.0);
        assert!(cut.eval(3.0) < 1e-18);
    }
}
