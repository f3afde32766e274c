//! Bessel `J_0, J_1` and Hankel `H^(1)_0, H^(1)_1` of complex argument.
//!
//! * `|z| <= SERIES_RADIUS`: ascending power series for `J` and `Y`.
//! * otherwise `J` by Miller's backward recurrence normalized against
//!   `exp(-+ i z)`, and `H^(1)` through `K_nu(-i z)` evaluated with Steed's
//!   continued fraction (converges for `Re(-i z) >= 0`).

use num_complex::Complex64;
use std::f64::consts::{FRAC_2_PI, PI};

use super::{SpecFunError, EULER_GAMMA};

/// Crossover between the power series and the recurrence / continued
/// fraction regimes. Picked from an accuracy sweep against 80-digit
/// reference values (see the `crossover_sweep` test).
pub const SERIES_RADIUS: f64 = 2.0;

const MAX_ABS_ARG: f64 = 400.0;
const MIN_HANKEL_ARG: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselOrder {
    Zero,
    One,
}

impl TryFrom<u32> for BesselOrder {
    type Error = SpecFunError;

    fn try_from(v: u32) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Self::Zero),
            1 => Ok(Self::One),
            _ => Err(SpecFunError::Domain {
                function: "bessel",
                arg: v.to_string(),
                reason: "only orders 0 and 1 are implemented",
            }),
        }
    }
}

/// `J_order(z)` for `|z| <= 400`, `Re z >= 0`.
pub fn bessel_j(order: BesselOrder, z: Complex64) -> Result<Complex64, SpecFunError> {
    if !(z.norm() <= MAX_ABS_ARG && z.re >= 0.0) {
        return Err(SpecFunError::Domain {
            function: "bessel_j",
            arg: z.to_string(),
            reason: "need |z| <= 400 and Re z >= 0",
        });
    }
    let (j0, j1) = bessel_j01(z);
    Ok(match order {
        BesselOrder::Zero => j0,
        BesselOrder::One => j1,
    })
}

/// `H^(1)_order(z)` for `1e-8 <= |z| <= 400` with `Im z >= 0` or `Re z > 0`.
pub fn hankel1(order: BesselOrder, z: Complex64) -> Result<Complex64, SpecFunError> {
    let r = z.norm();
    if r == 0.0 {
        return Err(SpecFunError::Pole {
            function: "hankel1",
            arg: z.to_string(),
        });
    }
    if !(r >= MIN_HANKEL_ARG && r <= MAX_ABS_ARG && (z.im >= 0.0 || z.re > 0.0)) {
        return Err(SpecFunError::Domain {
            function: "hankel1",
            arg: z.to_string(),
            reason: "need 1e-8 <= |z| <= 400 and (Im z >= 0 or Re z > 0)",
        });
    }
    let (h0, h1) = hankel1_01(z);
    Ok(match order {
        BesselOrder::Zero => h0,
        BesselOrder::One => h1,
    })
}

/// `(J_0(z), J_1(z))` without domain checks.
pub fn bessel_j01(z: Complex64) -> (Complex64, Complex64) {
    if z.norm() <= SERIES_RADIUS {
        j01_series(z)
    } else {
        j01_miller(z)
    }
}

/// `(H^(1)_0(z), H^(1)_1(z))` without domain checks.
pub fn hankel1_01(z: Complex64) -> (Complex64, Complex64) {
    if z.norm() <= SERIES_RADIUS {
        let (j0, j1) = j01_series(z);
        let (y0, y1) = y01_series(z, j0, j1);
        let i = Complex64::i();
        return (j0 + i * y0, j1 + i * y1);
    }
    if z.im >= 0.0 {
        hankel1_steed(z)
    } else {
        // H1 = 2J - H2 with H2(z) = conj(H1(conj z)); H1 dominates here
        let (j0, j1) = j01_miller(z);
        let (a0, a1) = hankel1_steed(z.conj());
        (2.0 * j0 - a0.conj(), 2.0 * j1 - a1.conj())
    }
}

fn j01_series(z: Complex64) -> (Complex64, Complex64) {
    let q = -0.25 * z * z;
    let mut t0 = Complex64::new(1.0, 0.0);
    let mut t1 = Complex64::new(1.0, 0.0);
    let mut s0 = t0;
    let mut s1 = t1;
    for k in 1..60 {
        let k = k as f64;
        t0 *= q / (k * k);
        t1 *= q / (k * (k + 1.0));
        s0 += t0;
        s1 += t1;
        if t0.norm() <= 1e-17 * s0.norm() && t1.norm() <= 1e-17 * s1.norm() {
            break;
        }
    }
    (s0, 0.5 * z * s1)
}

fn y01_series(z: Complex64, j0: Complex64, j1: Complex64) -> (Complex64, Complex64) {
    let q = -0.25 * z * z;
    let log_half = (0.5 * z).ln();
    // sum_{k>=1} H_k q^k / (k!)^2
    let mut t0 = Complex64::new(1.0, 0.0);
    let mut harmonic = 0.0;
    let mut s0 = Complex64::new(0.0, 0.0);
    // sum_{k>=0} (psi(k+1) + psi(k+2)) q^k / (k! (k+1)!)
    let mut t1 = Complex64::new(1.0, 0.0);
    let mut s1 = Complex64::new(1.0 - 2.0 * EULER_GAMMA, 0.0);
    for k in 1..60 {
        let kf = k as f64;
        t0 *= q / (kf * kf);
        t1 *= q / (kf * (kf + 1.0));
        harmonic += 1.0 / kf;
        let d0 = harmonic * t0;
        let d1 = (2.0 * harmonic + 1.0 / (kf + 1.0) - 2.0 * EULER_GAMMA) * t1;
        s0 += d0;
        s1 += d1;
        if d0.norm() <= 1e-17 * s0.norm() && d1.norm() <= 1e-17 * s1.norm() {
            break;
        }
    }
    let y0 = FRAC_2_PI * ((log_half + EULER_GAMMA) * j0 - s0);
    let y1 = -FRAC_2_PI / z + FRAC_2_PI * log_half * j1 - (0.5 / PI) * z * s1;
    (y0, y1)
}

fn j01_miller(z: Complex64) -> (Complex64, Complex64) {
    let r = z.norm();
    let start = ((r + (160.0 * r.max(1.0)).sqrt() + 20.0) / 2.0).ceil() as usize * 2;
    let inv = 1.0 / z;
    // Normalization sum_n c_n J_n = target:
    //   real z:    J0 + 2 sum_k J_2k = 1
    //   otherwise: J0 + 2 sum_n (-i sgn)^n J_n = exp(-i sgn z), sgn = +1 for Im z >= 0
    let (coef, target) = if z.im == 0.0 {
        let two = Complex64::new(2.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        ([two, zero, two, zero], Complex64::new(1.0, 0.0))
    } else {
        let step = if z.im > 0.0 {
            Complex64::new(0.0, -1.0)
        } else {
            Complex64::new(0.0, 1.0)
        };
        let mut coef = [Complex64::new(2.0, 0.0); 4];
        for p in 1..4 {
            coef[p] = coef[p - 1] * step;
        }
        (coef, (step * z).exp())
    };
    let mut next = Complex64::new(0.0, 0.0);
    let mut cur = Complex64::new(1e-30, 0.0);
    let mut norm = Complex64::new(0.0, 0.0);
    let mut j1 = Complex64::new(0.0, 0.0);
    let mut n = start;
    while n > 0 {
        // cur = J_n (unnormalized), produce J_{n-1}
        norm += coef[n % 4] * cur;
        let prev = 2.0 * n as f64 * inv * cur - next;
        next = cur;
        cur = prev;
        n -= 1;
        if n == 1 {
            j1 = cur;
        }
        if cur.norm() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
        }
    }
    norm += cur;
    let scale = target / norm;
    (cur * scale, j1 * scale)
}

/// `H^(1)_0, H^(1)_1` from `K_0, K_1` at `w = -i z` (Steed's CF2).
fn hankel1_steed(z: Complex64) -> (Complex64, Complex64) {
    let x = Complex64::new(z.im, -z.re);
    let one = Complex64::new(1.0, 0.0);
    let mut b = 2.0 * (one + x);
    let mut d = one / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = Complex64::new(0.0, 0.0);
    let mut q2 = one;
    let a1 = 0.25;
    let mut q = Complex64::new(a1, 0.0);
    let mut c = Complex64::new(a1, 0.0);
    let mut a = -a1;
    let mut s = one + q * delh;
    for i in 2..100_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = one / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if dels.norm() < 1e-17 * s.norm() {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (Complex64::new(0.0, -FRAC_2_PI) * k0, -FRAC_2_PI * k1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn values_at_origin() {
        let (j0, j1) = bessel_j01(c(0.0, 0.0));
        assert_eq!(j0, c(1.0, 0.0));
        assert_eq!(j1, c(0.0, 0.0));
        assert!(hankel1(BesselOrder::Zero, c(0.0, 0.0)).is_err());
    }

    #[test]
    fn domain_errors() {
        assert!(bessel_j(BesselOrder::Zero, c(401.0, 0.0)).is_err());
        assert!(bessel_j(BesselOrder::Zero, c(-1.0, 0.0)).is_err());
        assert!(hankel1(BesselOrder::One, c(1e-9, 0.0)).is_err());
        assert!(hankel1(BesselOrder::One, c(-1.0, -1.0)).is_err());
        assert!(BesselOrder::try_from(2).is_err());
    }

    #[test]
    fn real_argument_gives_real_j() {
        for x in [0.3, 1.0, 2.5, 7.0, 33.0, 120.0, 399.0] {
            let (j0, j1) = bessel_j01(c(x, 0.0));
            assert!(j0.im.abs() <= 1e-15 * j0.norm(), "x={x}");
            assert!(j1.im.abs() <= 1e-15 * j1.norm(), "x={x}");
        }
    }

    #[test]
    fn small_argument_branch_continuity() {
        let z = c(1.999_999, 0.3);
        let w = c(2.000_001, 0.3);
        let (a, _) = hankel1_01(z);
        let (b, _) = hankel1_01(w);
        assert!(rel(a, b) < 1e-5);
        let (ja, _) = bessel_j01(z);
        let (jb, _) = bessel_j01(w);
        assert!(rel(ja, jb) < 1e-5);
    }

    #[test]
    fn lower_half_plane_uses_reflection() {
        // mpmath hankel1(0, 3-1j)
        let (h0, _) = hankel1_01(c(3.0, -1.0));
        let (j0, _) = bessel_j01(c(3.0, -1.0));
        let (h0c, _) = hankel1_01(c(3.0, 1.0));
        // H2(z) = conj(H1(conj z)) and J = (H1 + H2)/2
        assert!(rel(0.5 * (h0 + h0c.conj()), j0) < 1e-13);
    }
}
