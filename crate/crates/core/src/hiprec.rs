//! Extended-precision reals and the dual Vandermonde solve behind the
//! correction weights.
//!
//! The moment systems `sum_j w_j x_j^k = b_k` with `x_j = j^2` are extremely
//! ill-conditioned (`K = 20` involves powers up to `400^20`), so they are
//! solved in binary floating point with a configurable number of decimal
//! digits and checked by re-substitution at that precision.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use dashu_float::round::mode::HalfEven;
use dashu_float::{DBig, FBig};
use thiserror::Error;

/// Default working precision in significant decimal digits.
pub const DEFAULT_DIGITS: u32 = 60;
/// Smallest precision accepted from the environment.
pub const MIN_DIGITS: u32 = 30;
/// Environment variable overriding [`DEFAULT_DIGITS`].
pub const PRECISION_ENV: &str = "ZETATRAP_PRECISION_DIGITS";
/// Re-substitution bound, relative to `1 + |b_k|`.
pub const RESIDUAL_BOUND: f64 = 1e-40;
/// Largest system handled by [`solve_dual_vandermonde`] (`K <= 25`).
pub const MAX_SYSTEM_SIZE: usize = 26;

const BITS_PER_DIGIT: f64 = std::f64::consts::LOG2_10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HiPrecError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("residual {residual:e} exceeds {bound:e} at {digits} digits")]
    PrecisionInsufficient {
        residual: f64,
        bound: f64,
        digits: u32,
    },
    #[error("{var}={value:?} is not an integer >= {min}")]
    BadEnvironment {
        var: &'static str,
        value: String,
        min: u32,
    },
}

/// Working precision, in significant decimal digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Precision(u32);

impl Precision {
    pub fn digits(digits: u32) -> Self {
        Self(digits.max(1))
    }

    pub fn decimal_digits(self) -> u32 {
        self.0
    }

    pub fn bits(self) -> usize {
        (self.0 as f64 * BITS_PER_DIGIT).ceil() as usize + 4
    }

    pub fn doubled(self) -> Self {
        Self(self.0 * 2)
    }
}

impl Default for Precision {
    fn default() -> Self {
        Self(DEFAULT_DIGITS)
    }
}

/// Precision from `ZETATRAP_PRECISION_DIGITS`, or the default when unset.
pub fn working_precision() -> Result<Precision, HiPrecError> {
    match std::env::var(PRECISION_ENV) {
        Err(_) => Ok(Precision::default()),
        Ok(v) => match v.trim().parse::<u32>() {
            Ok(d) if d >= MIN_DIGITS => Ok(Precision(d)),
            _ => Err(HiPrecError::BadEnvironment {
                var: PRECISION_ENV,
                value: v,
                min: MIN_DIGITS,
            }),
        },
    }
}

type Inner = FBig<HalfEven, 2>;

/// Binary floating-point number with a fixed number of significant bits,
/// correctly rounded (half-to-even) after every operation.
#[derive(Clone, PartialEq, PartialOrd)]
pub struct BigReal(Inner);

impl BigReal {
    fn wrap(x: Inner, bits: usize) -> Self {
        Self(x.with_precision(bits).value())
    }

    pub fn zero(p: Precision) -> Self {
        Self::from_i64(0, p)
    }

    pub fn one(p: Precision) -> Self {
        Self::from_i64(1, p)
    }

    pub fn from_i64(n: i64, p: Precision) -> Self {
        Self::wrap(Inner::from(n), p.bits())
    }

    /// Exact conversion of a finite double (then rounded to `p` if needed).
    pub fn from_f64(x: f64, p: Precision) -> Result<Self, HiPrecError> {
        if !x.is_finite() {
            return Err(HiPrecError::InvalidInput(format!("non-finite value {x}")));
        }
        let v = Inner::try_from(x).map_err(|e| HiPrecError::InvalidInput(format!("{x}: {e:?}")))?;
        Ok(Self::wrap(v, p.bits()))
    }

    /// Parses a decimal literal such as `-1.25e-3` and rounds it to `p`.
    pub fn parse_decimal(s: &str, p: Precision) -> Result<Self, HiPrecError> {
        let d = DBig::from_str(s.trim())
            .map_err(|e| HiPrecError::InvalidInput(format!("{s:?}: {e:?}")))?;
        let v = d.with_base_and_precision::<2>(p.bits()).value();
        Ok(Self(v.with_rounding::<HalfEven>()))
    }

    pub fn pi(p: Precision) -> Self {
        Self(Inner::pi(p.bits()))
    }

    pub fn precision(&self) -> Precision {
        Precision::digits((self.0.precision() as f64 / BITS_PER_DIGIT).floor() as u32)
    }

    fn bits(&self) -> usize {
        self.0.precision()
    }

    /// Nearest double.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().value()
    }

    /// Scientific decimal representation with `digits` significant digits.
    pub fn to_decimal_string(&self, digits: usize) -> String {
        let d = self.0.to_decimal().value().with_precision(digits).value();
        format!("{d:e}")
    }

    pub fn is_zero(&self) -> bool {
        self.0.repr().significand().is_zero()
    }

    pub fn abs(&self) -> Self {
        if self.0 < Inner::ZERO {
            Self(-self.0.clone())
        } else {
            self.clone()
        }
    }

    pub fn exp(&self) -> Self {
        Self(self.0.exp())
    }

    /// Natural logarithm; the argument must be positive.
    pub fn ln(&self) -> Self {
        Self(self.0.ln())
    }

    pub fn sqrt(&self) -> Self {
        Self(self.0.sqrt())
    }

    pub fn powi(&self, n: u32) -> Self {
        let bits = self.bits();
        let mut acc = Self::wrap(Inner::ONE, bits);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl fmt::Debug for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BigReal({})", self.to_decimal_string(24))
    }
}

impl fmt::Display for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = self.precision().decimal_digits() as usize;
        f.write_str(&self.to_decimal_string(digits))
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident) => {
        impl $tr<&BigReal> for &BigReal {
            type Output = BigReal;
            fn $m(self, rhs: &BigReal) -> BigReal {
                BigReal((&self.0).$m(&rhs.0))
            }
        }
        impl $tr<BigReal> for BigReal {
            type Output = BigReal;
            fn $m(self, rhs: BigReal) -> BigReal {
                BigReal(self.0.$m(rhs.0))
            }
        }
        impl $tr<&BigReal> for BigReal {
            type Output = BigReal;
            fn $m(self, rhs: &BigReal) -> BigReal {
                BigReal(self.0.$m(&rhs.0))
            }
        }
        impl $tr<BigReal> for &BigReal {
            type Output = BigReal;
            fn $m(self, rhs: BigReal) -> BigReal {
                BigReal((&self.0).$m(rhs.0))
            }
        }
    };
}

binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);
binop!(Div, div);

impl Neg for BigReal {
    type Output = BigReal;
    fn neg(self) -> BigReal {
        BigReal(-self.0)
    }
}

impl Neg for &BigReal {
    type Output = BigReal;
    fn neg(self) -> BigReal {
        BigReal(-&self.0)
    }
}

/// Solves `sum_j w_j x_j^k = b_k`, `k = 0..=K`, with the Bjorck-Pereyra
/// recurrence (`0^0 = 1`).
///
/// The returned weights are re-substituted at working precision; if any row
/// misses `RESIDUAL_BOUND * (1 + |b_k|)` the call fails with
/// [`HiPrecError::PrecisionInsufficient`] so the caller can retry with more
/// digits.
pub fn solve_dual_vandermonde(
    nodes: &[BigReal],
    moments: &[BigReal],
) -> Result<Vec<BigReal>, HiPrecError> {
    let n = nodes.len();
    if n == 0 || n != moments.len() {
        return Err(HiPrecError::InvalidInput(format!(
            "{} nodes for {} moments",
            n,
            moments.len()
        )));
    }
    if n > MAX_SYSTEM_SIZE {
        return Err(HiPrecError::InvalidInput(format!(
            "system of size {n} exceeds {MAX_SYSTEM_SIZE}"
        )));
    }
    for i in 0..n {
        for j in 0..i {
            if nodes[i] == nodes[j] {
                return Err(HiPrecError::InvalidInput(format!(
                    "duplicate node {} at positions {j} and {i}",
                    nodes[i]
                )));
            }
        }
    }

    let x = nodes;
    let mut b = moments.to_vec();
    let last = n - 1;
    for k in 0..last {
        for i in (k + 1..=last).rev() {
            b[i] = &b[i] - &(&x[k] * &b[i - 1]);
        }
    }
    for k in (0..last).rev() {
        for i in k + 1..=last {
            b[i] = &b[i] / &(&x[i] - &x[i - k - 1]);
        }
        for i in k..last {
            b[i] = &b[i] - &b[i + 1];
        }
    }

    let residual = relative_residual(x, &b, moments);
    if !(residual <= RESIDUAL_BOUND) {
        let digits = nodes
            .iter()
            .chain(moments)
            .map(|v| v.precision().decimal_digits())
            .max()
            .unwrap_or(0);
        return Err(HiPrecError::PrecisionInsufficient {
            residual,
            bound: RESIDUAL_BOUND,
            digits,
        });
    }
    Ok(b)
}

/// `max_k |sum_j w_j x_j^k - b_k| / (1 + |b_k|)`, evaluated in extended
/// precision and reported as a double.
pub fn relative_residual(nodes: &[BigReal], weights: &[BigReal], moments: &[BigReal]) -> f64 {
    let mut powers: Vec<BigReal> = weights.to_vec();
    let mut worst = 0.0f64;
    for (k, bk) in moments.iter().enumerate() {
        if k > 0 {
            for (p, x) in powers.iter_mut().zip(nodes) {
                *p = &*p * x;
            }
        }
        let mut sum = bk.clone() * BigReal::from_i64(0, bk.precision());
        for p in &powers {
            sum = sum + p;
        }
        let diff = (&sum - bk).abs().to_f64();
        let scale = 1.0 + bk.abs().to_f64();
        worst = worst.max(diff / scale);
    }
    worst
}

/// Solves the dual Vandermonde system for double-precision data, starting at
/// `start` digits and doubling on residual failure at most `max_doublings`
/// times. Returns the weights rounded to doubles and the precision used.
pub fn solve_dual_vandermonde_f64(
    nodes: &[f64],
    moments: &[f64],
    start: Precision,
    max_doublings: u32,
) -> Result<(Vec<f64>, Precision), HiPrecError> {
    let mut p = start;
    let mut attempt = 0;
    loop {
        let x = nodes
            .iter()
            .map(|&v| BigReal::from_f64(v, p))
            .collect::<Result<Vec<_>, _>>()?;
        let b = moments
            .iter()
            .map(|&v| BigReal::from_f64(v, p))
            .collect::<Result<Vec<_>, _>>()?;
        match solve_dual_vandermonde(&x, &b) {
            Ok(w) => return Ok((w.iter().map(BigReal::to_f64).collect(), p)),
            Err(HiPrecError::PrecisionInsufficient { .. }) if attempt < max_doublings => {
                attempt += 1;
                p = p.doubled();
            }
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> Precision {
        Precision::default()
    }

    fn big(v: i64) -> BigReal {
        BigReal::from_i64(v, p())
    }

    #[test]
    fn one_by_one() {
        let w = solve_dual_vandermonde(&[big(0)], &[big(7)]).unwrap();
        assert_eq!(w[0].to_f64(), 7.0);
    }

    #[test]
    fn two_by_two_by_elimination() {
        let b0 = BigReal::from_f64(0.918_938_533_204_672_7, p()).unwrap();
        let b1 = BigReal::from_f64(0.030_448_457_058_393_27, p()).unwrap();
        let w = solve_dual_vandermonde(&[big(0), big(1)], &[b0.clone(), b1.clone()]).unwrap();
        assert_eq!(w[1], b1);
        assert_eq!(w[0], &b0 - &b1);
    }

    #[test]
    fn k7_squares_residual() {
        let nodes: Vec<_> = (0..=7).map(|j| big(j * j)).collect();
        let moments: Vec<_> = (0..=7)
            .map(|k| BigReal::from_f64(1.0 / (1.0 + k as f64), p()).unwrap())
            .collect();
        let w = solve_dual_vandermonde(&nodes, &moments).unwrap();
        assert!(relative_residual(&nodes, &w, &moments) <= 1e-40);
    }

    #[test]
    fn duplicate_nodes_rejected() {
        let err = solve_dual_vandermonde(&[big(1), big(1)], &[big(0), big(1)]).unwrap_err();
        assert!(matches!(err, HiPrecError::InvalidInput(_)));
    }

    #[test]
    fn low_precision_is_reported() {
        let q = Precision::digits(16);
        let nodes: Vec<_> = (0..=12).map(|j| BigReal::from_i64(j * j, q)).collect();
        let moments: Vec<_> = (0..=12).map(|k| BigReal::from_i64(k + 1, q)).collect();
        let err = solve_dual_vandermonde(&nodes, &moments).unwrap_err();
        assert!(matches!(err, HiPrecError::PrecisionInsufficient { .. }));
    }

    #[test]
    fn retry_doubles_precision() {
        let nodes: Vec<f64> = (0..=20).map(|j| (j * j) as f64).collect();
        let moments: Vec<f64> = (0..=20).map(|k| 1.0 + k as f64).collect();
        let (w, used) =
            solve_dual_vandermonde_f64(&nodes, &moments, Precision::digits(30), 4).unwrap();
        assert!(used > Precision::digits(30));
        assert!(w.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn decimal_round_trip() {
        let x = BigReal::pi(p());
        let s = x.to_decimal_string(70);
        let y = BigReal::parse_decimal(&s, p()).unwrap();
        assert!((&x - &y).abs().to_f64() < 1e-58);
        assert!(s.starts_with("3.14159265358979323846264338327950288419716939937510"));
    }

    #[test]
    fn elementary_functions() {
        let two = big(2);
        let l = two.ln();
        assert!((l.to_f64() - std::f64::consts::LN_2).abs() < 1e-16);
        let back = l.exp();
        assert!((&back - &two).abs().to_f64() < 1e-55);
        assert_eq!(big(3).powi(5).to_f64(), 243.0);
        assert!(((big(2).sqrt() * big(2).sqrt()) - big(2)).abs().to_f64() < 1e-55);
    }
}
