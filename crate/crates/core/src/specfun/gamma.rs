use num_complex::Complex64;
use std::f64::consts::PI;

use super::{sin_pi, sin_pi_complex, SpecFunError};

// Lanczos approximation, g = 7, nine terms.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Gamma function of a real argument.
///
/// Positive integers up to 171 are returned as a direct factorial product.
/// Non-positive integers are poles.
pub fn gamma(x: f64) -> Result<f64, SpecFunError> {
    if !x.is_finite() {
        return Err(SpecFunError::Domain {
            function: "gamma",
            arg: x.to_string(),
            reason: "non-finite",
        });
    }
    if x <= 0.0 && x == x.floor() {
        return Err(SpecFunError::Pole {
            function: "gamma",
            arg: x.to_string(),
        });
    }
    if x == x.floor() && x <= 171.0 {
        return Ok((2..x as u32).fold(1.0, |acc, k| acc * k as f64));
    }
    if x < 0.5 {
        // reflection
        let g = gamma(1.0 - x)?;
        return Ok(PI / (sin_pi(x) * g));
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    let a = LANCZOS[1..]
        .iter()
        .enumerate()
        .fold(LANCZOS[0], |acc, (i, c)| acc + c / (z + (i + 1) as f64));
    // split the power to postpone overflow
    let half = t.powf(0.5 * (z + 0.5));
    Ok(SQRT_2PI * half * (half * (-t).exp()) * a)
}

/// Gamma function of a complex argument (Lanczos with reflection).
pub fn gamma_complex(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        return Complex64::new(PI, 0.0) / (sin_pi_complex(z) * gamma_complex(1.0 - z));
    }
    let z = z - 1.0;
    let t = z + LANCZOS_G + 0.5;
    let a = LANCZOS[1..]
        .iter()
        .enumerate()
        .fold(Complex64::new(LANCZOS[0], 0.0), |acc, (i, c)| {
            acc + c / (z + (i + 1) as f64)
        });
    SQRT_2PI * ((z + 0.5) * t.ln() - t).exp() * a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn factorials_and_half_integers() {
        assert_eq!(gamma(1.0).unwrap(), 1.0);
        assert_eq!(gamma(5.0).unwrap(), 24.0);
        assert!(rel(gamma(0.5).unwrap(), 1.772_453_850_905_516) < 1e-14);
        // mpmath, 40 digits
        assert!(rel(gamma(-2.5).unwrap(), -0.945_308_720_482_941_9) < 1e-13);
        assert!(rel(gamma(49.7).unwrap(), 1.888_498_711_014_109_4e62) < 1e-13);
    }

    #[test]
    fn poles_are_errors() {
        for x in [0.0, -1.0, -7.0] {
            assert!(matches!(gamma(x), Err(SpecFunError::Pole { .. })));
        }
    }

    #[test]
    fn complex_gamma_matches_real_axis() {
        for x in [0.3, 1.5, 2.0, 7.25, 30.5, -3.5, -0.2] {
            let g = gamma_complex(Complex64::new(x, 0.0));
            let r = gamma(x).unwrap();
            assert!(rel(g.re, r) < 1e-13, "x={x}: {g} vs {r}");
            assert!(g.im.abs() <= 1e-15 * r.abs());
        }
    }

    #[test]
    fn complex_gamma_recurrence() {
        let z = Complex64::new(2.3, -1.7);
        let lhs = gamma_complex(z + 1.0);
        let rhs = z * gamma_complex(z);
        assert!((lhs - rhs).norm() / lhs.norm() < 1e-14);
    }
}
