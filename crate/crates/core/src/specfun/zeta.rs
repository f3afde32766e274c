use num_complex::Complex64;
use std::f64::consts::PI;

use super::gamma::{gamma, gamma_complex};
use super::{cos_pi, sin_pi, sin_pi_complex, SpecFunError};

/// Step used for complex-step differentiation of zeta.
pub const COMPLEX_STEP: f64 = 1e-9;

/// Largest `k` accepted by [`zeta_deriv_neg_even`].
const MAX_DERIV_INDEX: usize = 25;

/// Tolerated relative disagreement between the two routes to `zeta'(-2k)`.
const DERIV_CONSISTENCY: f64 = 1e-10;

// Euler-Maclaurin cut-off: direct summation over n < EM_N.
const EM_N: f64 = 32.0;

// B_{2k} / (2k)!, k = 1..30
const BERNOULLI_OVER_FACTORIAL: [f64; 30] = [
    8.333_333_333_333_333_3e-2,
    -1.388_888_888_888_888_9e-3,
    3.306_878_306_878_306_9e-5,
    -8.267_195_767_195_767_2e-7,
    2.087_675_698_786_809_9e-8,
    -5.284_190_138_687_493_2e-10,
    1.338_253_653_068_467_9e-11,
    -3.389_680_296_322_582_9e-13,
    8.586_062_056_277_844_6e-15,
    -2.174_868_698_558_061_9e-16,
    5.509_002_828_360_229_5e-18,
    -1.395_446_468_581_252_3e-19,
    3.534_707_039_629_467_5e-21,
    -8.953_517_427_037_546_9e-23,
    2.267_952_452_337_683_1e-24,
    -5.744_790_668_872_202_4e-26,
    1.455_172_475_614_864_9e-27,
    -3.685_994_940_665_310_2e-29,
    9.336_734_257_095_044_7e-31,
    -2.365_022_415_700_629_9e-32,
    5.990_671_762_482_134_3e-34,
    -1.517_454_884_468_290_3e-35,
    3.843_758_125_454_188_2e-37,
    -9.736_353_072_646_691_0e-39,
    2.466_247_044_200_681_0e-40,
    -6.247_076_741_820_743_7e-42,
    1.582_403_024_464_491_4e-43,
    -4.008_273_685_948_936_0e-45,
    1.015_307_585_556_955_6e-46,
    -2.571_804_158_241_871_7e-48,
];

/// Riemann zeta function of a real argument.
///
/// Euler-Maclaurin summation for `s >= 0`, the functional equation
/// `zeta(s) = 2^s pi^(s-1) sin(pi s/2) Gamma(1-s) zeta(1-s)` for `s < 0`.
pub fn zeta(s: f64) -> Result<f64, SpecFunError> {
    if s == 1.0 {
        return Err(SpecFunError::Pole {
            function: "zeta",
            arg: "1".into(),
        });
    }
    if !s.is_finite() {
        return Err(SpecFunError::Domain {
            function: "zeta",
            arg: s.to_string(),
            reason: "non-finite",
        });
    }
    if s >= 0.0 {
        return Ok(euler_maclaurin_real(s));
    }
    let z1 = euler_maclaurin_real(1.0 - s);
    let g = gamma(1.0 - s)?;
    Ok(2f64.powf(s) * PI.powf(s - 1.0) * sin_pi(0.5 * s) * g * z1)
}

fn euler_maclaurin_real(s: f64) -> f64 {
    let n_cut = EM_N;
    let mut sum = 0.0;
    for n in (1..n_cut as u32).rev() {
        sum += (n as f64).powf(-s);
    }
    let n_s = n_cut.powf(-s);
    sum += n_cut * n_s / (s - 1.0) + 0.5 * n_s;
    // s (s+1) ... (s+2k-2) N^{-s-2k+1}
    let mut factor = s * n_s / n_cut;
    for (k, b) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        let term = b * factor;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
        let k = (k + 1) as f64;
        factor *= (s + 2.0 * k - 1.0) * (s + 2.0 * k) / (n_cut * n_cut);
    }
    sum
}

fn euler_maclaurin_complex(s: Complex64) -> Complex64 {
    let n_cut = EM_N;
    let mut sum = Complex64::new(0.0, 0.0);
    for n in (1..n_cut as u32).rev() {
        sum += (-s * (n as f64).ln()).exp();
    }
    let n_s = (-s * n_cut.ln()).exp();
    sum += n_cut * n_s / (s - 1.0) + 0.5 * n_s;
    let mut factor = s * n_s / n_cut;
    for (k, b) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        let term = *b * factor;
        sum += term;
        // Componentwise, so a tiny imaginary part (complex step) keeps its terms.
        if term.re.abs() <= 1e-17 * sum.re.abs() && term.im.abs() <= 1e-17 * sum.im.abs() {
            break;
        }
        let k = (k + 1) as f64;
        factor *= (s + 2.0 * k - 1.0) * (s + 2.0 * k) / (n_cut * n_cut);
    }
    sum
}

/// Riemann zeta function of a complex argument.
///
/// Accurate to about 1e-12 relative for `Re s` in `[-50, 2]` near the real
/// axis, which is what complex-step differentiation needs.
pub fn zeta_complex(s: Complex64) -> Result<Complex64, SpecFunError> {
    if s == Complex64::new(1.0, 0.0) {
        return Err(SpecFunError::Pole {
            function: "zeta_complex",
            arg: "1".into(),
        });
    }
    if !(s.re.is_finite() && s.im.is_finite()) {
        return Err(SpecFunError::Domain {
            function: "zeta_complex",
            arg: s.to_string(),
            reason: "non-finite",
        });
    }
    if s.re >= 0.0 {
        return Ok(euler_maclaurin_complex(s));
    }
    let one_minus = 1.0 - s;
    let z1 = euler_maclaurin_complex(one_minus);
    let g = gamma_complex(one_minus);
    let two_s = (s * std::f64::consts::LN_2).exp();
    let pi_s = ((s - 1.0) * PI.ln()).exp();
    Ok(two_s * pi_s * sin_pi_complex(0.5 * s) * g * z1)
}

/// `zeta'(-2k)` from the closed forms `-ln(2 pi)/2` (k = 0) and
/// `(-1)^k (2k)! zeta(2k+1) / (2 (2 pi)^(2k))` (k >= 1).
pub fn zeta_deriv_neg_even_closed_form(k: usize) -> Result<f64, SpecFunError> {
    check_deriv_index(k)?;
    if k == 0 {
        return Ok(-0.5 * (2.0 * PI).ln());
    }
    let fact = (1..=2 * k).fold(1.0, |acc, i| acc * i as f64);
    let z = zeta((2 * k + 1) as f64)?;
    Ok(cos_pi(k as f64) * fact * z / (2.0 * (2.0 * PI).powi(2 * k as i32)))
}

/// `zeta'(-2k)` by complex-step differentiation, `Im zeta(-2k + i delta) / delta`.
pub fn zeta_deriv_complex_step(k: usize, delta: f64) -> Result<f64, SpecFunError> {
    check_deriv_index(k)?;
    let z = zeta_complex(Complex64::new(-2.0 * k as f64, delta))?;
    Ok(z.im / delta)
}

/// `zeta'(-2k)` for `0 <= k <= 25`.
///
/// Computed by both the closed form and complex-step differentiation; the
/// closed-form value is returned once the two agree to 1e-10 relative.
pub fn zeta_deriv_neg_even(k: usize) -> Result<f64, SpecFunError> {
    let closed = zeta_deriv_neg_even_closed_form(k)?;
    let stepped = zeta_deriv_complex_step(k, COMPLEX_STEP)?;
    let rel = (closed - stepped).abs() / closed.abs();
    if rel > DERIV_CONSISTENCY {
        return Err(SpecFunError::Inconsistent {
            k,
            closed,
            stepped,
            rel,
        });
    }
    Ok(closed)
}

fn check_deriv_index(k: usize) -> Result<(), SpecFunError> {
    if k > MAX_DERIV_INDEX {
        return Err(SpecFunError::UnsupportedRange {
            function: "zeta_deriv_neg_even",
            index: k,
            max: MAX_DERIV_INDEX,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_step_at_machine_epsilon() {
        for k in 0..=20 {
            let closed = zeta_deriv_neg_even_closed_form(k).unwrap();
            let stepped = zeta_deriv_complex_step(k, f64::EPSILON).unwrap();
            assert!(((closed - stepped) / closed).abs() < 1e-12, "k={k}");
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn spot_values() {
        assert!(rel(zeta(2.0).unwrap(), 1.644_934_066_848_226_4) < 1e-14);
        assert_eq!(zeta(0.0).unwrap(), -0.5);
        assert!(rel(zeta(-1.0).unwrap(), -1.0 / 12.0) < 1e-14);
        // mpmath, 40 digits
        assert!(rel(zeta(0.5).unwrap(), -1.460_354_508_809_586_8) < 1e-14);
        assert!(rel(zeta(-0.5).unwrap(), -0.207_886_224_977_354_57) < 1e-13);
        assert!(rel(zeta(-49.5).unwrap(), -2.984_941_320_315_572_4e23) < 1e-13);
        assert!(rel(zeta(49.5).unwrap(), 1.000_000_000_000_001_3) < 1e-15);
        assert!(rel(zeta(0.999).unwrap(), -999.422_857_155_787_9) < 1e-13);
        assert!(rel(zeta(1.001).unwrap(), 1_000.577_288_476_011_6) < 1e-13);
    }

    #[test]
    fn trivial_zeros() {
        for k in 1..=25 {
            assert_eq!(zeta(-2.0 * k as f64).unwrap(), 0.0);
        }
    }

    #[test]
    fn pole() {
        assert!(matches!(zeta(1.0), Err(SpecFunError::Pole { .. })));
        assert!(zeta_complex(Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn complex_agrees_on_real_axis() {
        for s in [
            -49.5, -20.3, -2.5, -0.5, 0.0, 0.25, 0.5, 1.5, 2.0, 7.0, 30.0,
        ] {
            let c = zeta_complex(Complex64::new(s, 0.0)).unwrap();
            let r = zeta(s).unwrap();
            assert!((c.re - r).abs() <= 1e-13 * r.abs(), "s={s}: {c} vs {r}");
        }
    }

    #[test]
    fn complex_step_derivatives() {
        let d0 = zeta_complex(Complex64::new(0.0, 1e-9)).unwrap().im / 1e-9;
        assert!((d0 + 0.918_938_533).abs() < 1e-7);
        let d2 = zeta_complex(Complex64::new(-2.0, 1e-9)).unwrap().im / 1e-9;
        assert!((d2 + 0.030_448_457).abs() < 1e-7);
    }

    #[test]
    fn derivative_closed_form_values() {
        assert!(rel(zeta_deriv_neg_even(0).unwrap(), -0.918_938_533_204_672_7) < 1e-15);
        assert!(rel(zeta_deriv_neg_even(1).unwrap(), -0.030_448_457_058_393_27) < 1e-14);
        assert!(rel(zeta_deriv_neg_even(2).unwrap(), 0.007_983_811_450_268_624) < 1e-14);
        assert!(rel(zeta_deriv_neg_even(20).unwrap(), 4.824_144_835_482_823e15) < 1e-13);
        assert!(matches!(
            zeta_deriv_neg_even(26),
            Err(SpecFunError::UnsupportedRange { .. })
        ));
    }

    #[test]
    fn routes_agree_up_to_k_25() {
        for k in 0..=25 {
            let a = zeta_deriv_neg_even_closed_form(k).unwrap();
            let b = zeta_deriv_complex_step(k, COMPLEX_STEP).unwrap();
            assert!(rel(b, a) < 1e-10, "k={k}: {a} vs {b}");
        }
    }
}
