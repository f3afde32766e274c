//! Smooth closed curves with analytic derivatives.
//!
//! Every curve is parameterized counterclockwise on `[0, 2pi)`. The outward
//! normal is `(d1_y, -d1_x) / |d1|`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec2 = Vector2<f64>;

/// Parameter period of every curve.
pub const PERIOD: f64 = TAU;
/// Speeds below this are rejected as degenerate.
pub const MIN_SPEED: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid geometry: {0}")]
    Invalid(String),
    #[error("degenerate parameterization at t = {t}: speed {speed:e}")]
    Degenerate { t: f64, speed: f64 },
}

/// JSON description of a built-in curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum CurveDescriptor {
    Star {
        base: f64,
        amplitude: f64,
        lobes: u32,
    },
    Circle {
        radius: f64,
    },
}

impl CurveDescriptor {
    pub fn build(&self) -> Result<ParametricCurve, GeometryError> {
        match *self {
            CurveDescriptor::Star {
                base,
                amplitude,
                lobes,
            } => star_curve(base, amplitude, lobes),
            CurveDescriptor::Circle { radius } => circle(radius),
        }
    }
}

impl Default for CurveDescriptor {
    fn default() -> Self {
        CurveDescriptor::Star {
            base: 1.0,
            amplitude: 0.3,
            lobes: 5,
        }
    }
}

type Map = Arc<dyn Fn(f64) -> Vec2 + Send + Sync>;

/// A `2pi`-periodic regular curve given by its position and first two
/// derivatives.
#[derive(Clone)]
pub struct ParametricCurve {
    pos: Map,
    d1: Map,
    d2: Map,
    descriptor: Option<CurveDescriptor>,
}

impl fmt::Debug for ParametricCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricCurve")
            .field("descriptor", &self.descriptor)
            .finish_non_exhaustive()
    }
}

/// Position, derivatives and the derived local quantities at one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveJet {
    pub t: f64,
    pub pos: Vec2,
    pub d1: Vec2,
    pub d2: Vec2,
    pub speed: f64,
    pub normal: Vec2,
    /// `(d2 . n) / (4 pi |d1|^2)`.
    pub c0: f64,
    /// Signed curvature, `1/R` on a counterclockwise circle.
    pub curvature: f64,
}

impl CurveJet {
    pub fn tangent(&self) -> Vec2 {
        self.d1 / self.speed
    }
}

impl ParametricCurve {
    /// Builds a curve from user callables and checks periodicity, regularity
    /// and derivative consistency at 32 sample parameters.
    pub fn from_fns(
        pos: impl Fn(f64) -> Vec2 + Send + Sync + 'static,
        d1: impl Fn(f64) -> Vec2 + Send + Sync + 'static,
        d2: impl Fn(f64) -> Vec2 + Send + Sync + 'static,
    ) -> Result<Self, GeometryError> {
        let curve = Self {
            pos: Arc::new(pos),
            d1: Arc::new(d1),
            d2: Arc::new(d2),
            descriptor: None,
        };
        curve.validate()?;
        Ok(curve)
    }

    pub fn descriptor(&self) -> Option<CurveDescriptor> {
        self.descriptor
    }

    pub fn position(&self, t: f64) -> Vec2 {
        (self.pos)(t)
    }

    pub fn d1(&self, t: f64) -> Vec2 {
        (self.d1)(t)
    }

    pub fn d2(&self, t: f64) -> Vec2 {
        (self.d2)(t)
    }

    pub fn jet(&self, t: f64) -> Result<CurveJet, GeometryError> {
        let pos = self.position(t);
        let d1 = self.d1(t);
        let d2 = self.d2(t);
        let speed = d1.norm();
        if !(speed >= MIN_SPEED) {
            return Err(GeometryError::Degenerate { t, speed });
        }
        let normal = Vec2::new(d1.y, -d1.x) / speed;
        let speed2 = speed * speed;
        Ok(CurveJet {
            t,
            pos,
            d1,
            d2,
            speed,
            normal,
            c0: d2.dot(&normal) / (4.0 * PI * speed2),
            curvature: (d1.x * d2.y - d1.y * d2.x) / (speed2 * speed),
        })
    }

    fn validate(&self) -> Result<(), GeometryError> {
        const STEP: f64 = 1e-5;
        for i in 0..32 {
            // Deterministic, irregularly spaced sample parameters.
            let t = PERIOD * ((i as f64 * 0.618_033_988_749_894_9 + 0.1234) % 1.0);
            let jet = self.jet(t)?;
            let shifted = self.position(t + PERIOD);
            let scale = 1.0 + jet.pos.norm();
            if (shifted - jet.pos).norm() > 1e-12 * scale {
                return Err(GeometryError::Invalid(format!(
                    "curve is not 2pi-periodic at t = {t}"
                )));
            }
            let fd1 = (self.position(t + STEP) - self.position(t - STEP)) / (2.0 * STEP);
            let fd2 = (self.d1(t + STEP) - self.d1(t - STEP)) / (2.0 * STEP);
            let tol1 = 1e-6 * (1.0 + jet.d1.norm());
            let tol2 = 1e-6 * (1.0 + jet.d2.norm());
            if (fd1 - jet.d1).norm() > tol1 || (fd2 - jet.d2).norm() > tol2 {
                return Err(GeometryError::Invalid(format!(
                    "derivatives disagree with finite differences at t = {t}"
                )));
            }
            if !(jet.pos.iter().chain(jet.d2.iter()).all(|v| v.is_finite())) {
                return Err(GeometryError::Invalid(format!(
                    "non-finite value at t = {t}"
                )));
            }
        }
        if self.signed_area(256) <= 0.0 {
            return Err(GeometryError::Invalid(
                "curve must be counterclockwise (positive signed area)".into(),
            ));
        }
        Ok(())
    }

    /// Enclosed signed area by the trapezoidal rule on `n` nodes.
    pub fn signed_area(&self, n: usize) -> f64 {
        let h = PERIOD / n as f64;
        (0..n)
            .map(|i| {
                let t = i as f64 * h;
                let p = self.position(t);
                let d = self.d1(t);
                0.5 * (p.x * d.y - p.y * d.x)
            })
            .sum::<f64>()
            * h
    }

    /// Winding number of the curve about `x`, by the trapezoidal rule on
    /// `n` nodes. Accurate (close to an integer) when `x` is well separated
    /// from the curve relative to `2pi / n`.
    pub fn winding_number(&self, x: Vec2, n: usize) -> f64 {
        let h = PERIOD / n as f64;
        (0..n)
            .map(|i| {
                let t = i as f64 * h;
                let r = self.position(t) - x;
                let d = self.d1(t);
                (r.x * d.y - r.y * d.x) / r.norm_squared()
            })
            .sum::<f64>()
            * h
            / PERIOD
    }

    /// Distance from `x` to the curve and the closest parameter, from a
    /// sampled search refined by Newton's method.
    pub fn distance_to(&self, x: Vec2, samples: usize) -> (f64, f64) {
        let samples = samples.max(16);
        let h = PERIOD / samples as f64;
        let mut best_t = 0.0;
        let mut best = f64::INFINITY;
        for i in 0..samples {
            let t = i as f64 * h;
            let d = (self.position(t) - x).norm_squared();
            if d < best {
                best = d;
                best_t = t;
            }
        }
        let mut t = best_t;
        for _ in 0..30 {
            let r = self.position(t) - x;
            let d1 = self.d1(t);
            let f = r.dot(&d1);
            let df = d1.norm_squared() + r.dot(&self.d2(t));
            if df <= 0.0 {
                break;
            }
            let step = (f / df).clamp(-h, h);
            t -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let refined = (self.position(t) - x).norm();
        if refined * refined <= best {
            (refined, t.rem_euclid(PERIOD))
        } else {
            (best.sqrt(), best_t)
        }
    }

    /// Whether `x` lies in the bounded region enclosed by the curve.
    pub fn encloses(&self, x: Vec2) -> bool {
        let (dist, _) = self.distance_to(x, 512);
        // Enough nodes that the trapezoidal winding integral is resolved.
        let n = ((PERIOD * self.max_speed(64) / dist.max(1e-8)) as usize * 8).clamp(256, 1 << 20);
        self.winding_number(x, n).round() != 0.0
    }

    fn max_speed(&self, n: usize) -> f64 {
        (0..n)
            .map(|i| self.d1(i as f64 * PERIOD / n as f64).norm())
            .fold(0.0, f64::max)
    }
}

/// Polar star `p(t) (cos t, sin t)` with `p(t) = base + amplitude cos(lobes t)`.
pub fn star_curve(base: f64, amplitude: f64, lobes: u32) -> Result<ParametricCurve, GeometryError> {
    if !(base.is_finite() && amplitude.is_finite()) {
        return Err(GeometryError::Invalid("non-finite star parameters".into()));
    }
    let min_radius = if lobes == 0 {
        base + amplitude
    } else {
        base - amplitude.abs()
    };
    if !(min_radius > 0.0) {
        return Err(GeometryError::Invalid(format!(
            "star radius reaches {min_radius} <= 0"
        )));
    }
    let l = lobes as f64;
    let radial = move |t: f64| {
        let (s, c) = (l * t).sin_cos();
        (
            base + amplitude * c,
            -amplitude * l * s,
            -amplitude * l * l * c,
        )
    };
    let pos = move |t: f64| {
        let (p, _, _) = radial(t);
        let (s, c) = t.sin_cos();
        Vec2::new(p * c, p * s)
    };
    let d1 = move |t: f64| {
        let (p, dp, _) = radial(t);
        let (s, c) = t.sin_cos();
        Vec2::new(dp * c - p * s, dp * s + p * c)
    };
    let d2 = move |t: f64| {
        let (p, dp, ddp) = radial(t);
        let (s, c) = t.sin_cos();
        Vec2::new(
            ddp * c - 2.0 * dp * s - p * c,
            ddp * s + 2.0 * dp * c - p * s,
        )
    };
    let mut curve = ParametricCurve::from_fns(pos, d1, d2)?;
    curve.descriptor = Some(CurveDescriptor::Star {
        base,
        amplitude,
        lobes,
    });
    Ok(curve)
}

/// Circle of the given radius about the origin.
pub fn circle(radius: f64) -> Result<ParametricCurve, GeometryError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(GeometryError::Invalid(format!("circle radius {radius}")));
    }
    let mut curve = ParametricCurve::from_fns(
        move |t| radius * Vec2::new(t.cos(), t.sin()),
        move |t| radius * Vec2::new(-t.sin(), t.cos()),
        move |t| -radius * Vec2::new(t.cos(), t.sin()),
    )?;
    curve.descriptor = Some(CurveDescriptor::Circle { radius });
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn star_at_zero() {
        let c = star_curve(1.0, 0.3, 5).unwrap();
        let j = c.jet(0.0).unwrap();
        assert_abs_diff_eq!(j.pos, Vec2::new(1.3, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(j.speed, 1.3, epsilon = 1e-15);
        assert_abs_diff_eq!(j.normal, Vec2::new(1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn degenerate_star_is_unit_circle() {
        let c = star_curve(1.0, 0.0, 0).unwrap();
        for i in 0..16 {
            let j = c.jet(i as f64 * 0.4).unwrap();
            assert_abs_diff_eq!(j.speed, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn circle_c0() {
        for r in [1.0, 2.5] {
            let c = circle(r).unwrap();
            for i in 0..8 {
                let j = c.jet(i as f64).unwrap();
                assert_abs_diff_eq!(j.c0, -1.0 / (4.0 * PI * r), epsilon = 1e-15);
                assert_abs_diff_eq!(j.curvature, 1.0 / r, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn bad_star_rejected() {
        assert!(star_curve(1.0, 1.2, 5).is_err());
        assert!(circle(0.0).is_err());
    }

    #[test]
    fn clockwise_rejected() {
        let cw = ParametricCurve::from_fns(
            |t| Vec2::new(t.cos(), -t.sin()),
            |t| Vec2::new(-t.sin(), -t.cos()),
            |t| Vec2::new(-t.cos(), t.sin()),
        );
        assert!(cw.is_err());
    }

    #[test]
    fn wrong_derivative_rejected() {
        let bad = ParametricCurve::from_fns(
            |t| Vec2::new(t.cos(), t.sin()),
            |t| Vec2::new(-t.sin(), t.cos()) * 1.01,
            |t| -Vec2::new(t.cos(), t.sin()),
        );
        assert!(matches!(bad, Err(GeometryError::Invalid(_))));
    }

    #[test]
    fn enclosure_and_distance() {
        let c = star_curve(1.0, 0.3, 5).unwrap();
        assert!(c.encloses(Vec2::new(0.4, 0.0)));
        assert!(!c.encloses(Vec2::new(2.0, 0.0)));
        let (d, t) = c.distance_to(Vec2::new(2.0, 0.0), 256);
        assert_abs_diff_eq!(d, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(t, 0.0, epsilon = 1e-7);
    }

    #[test]
    fn descriptor_json() {
        let d: CurveDescriptor =
            serde_json::from_str(r#"{"type":"star","base":1.0,"amplitude":0.3,"lobes":5}"#)
                .unwrap();
        assert_eq!(d, CurveDescriptor::default());
        let c: CurveDescriptor = serde_json::from_str(r#"{"type":"circle","radius":2}"#).unwrap();
        assert_eq!(c, CurveDescriptor::Circle { radius: 2.0 });
    }
}
