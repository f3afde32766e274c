//! Trapezoidal machinery on closed curves: the plain periodic rule, the
//! zeta-corrected operator rows for the Laplace, Helmholtz and Stokes layer
//! potentials, and Kress's global spectral rule as a baseline.
//!
//! A corrected row differs from the punctured trapezoidal row only at the
//! diagonal and at the `2K` neighbours `m +- j` (indices mod N).

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{CurveJet, GeometryError, ParametricCurve, PERIOD};
use crate::kernels::{
    helmholtz_values, stokes_diagonal_limits, stokes_kernels, HelmholtzConstants, KernelPair,
};
use crate::zetaweights::{CorrectionStencil, SingularityKind};

/// Smallest grid accepted.
pub const MIN_NODES: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// `N` equispaced nodes `t_n = n h` on one period, `h = 2pi / N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapezoidGrid {
    n: usize,
    h: f64,
}

impl TrapezoidGrid {
    pub fn new(n: usize) -> Result<Self, QuadratureError> {
        if n < MIN_NODES {
            return Err(QuadratureError::InvalidInput(format!(
                "grid needs at least {MIN_NODES} nodes, got {n}"
            )));
        }
        Ok(Self {
            n,
            h: PERIOD / n as f64,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.node(i))
    }
}

/// `h sum_n g_n`.
pub fn ptr<T>(samples: &[T], h: f64) -> T
where
    T: Copy + std::iter::Sum<T> + std::ops::Mul<f64, Output = T>,
{
    samples.iter().copied().sum::<T>() * h
}

/// A curve sampled on a grid, with jets cached at every node.
#[derive(Debug, Clone)]
pub struct DiscreteCurve {
    grid: TrapezoidGrid,
    jets: Vec<CurveJet>,
}

impl DiscreteCurve {
    pub fn new(curve: &ParametricCurve, grid: TrapezoidGrid) -> Result<Self, QuadratureError> {
        let jets = grid
            .nodes()
            .map(|t| curve.jet(t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { grid, jets })
    }

    pub fn grid(&self) -> TrapezoidGrid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.n
    }

    pub fn is_empty(&self) -> bool {
        self.jets.is_empty()
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    pub fn jets(&self) -> &[CurveJet] {
        &self.jets
    }

    pub fn jet(&self, i: usize) -> &CurveJet {
        &self.jets[i]
    }

    fn check_stencil(&self, stencil: &CorrectionStencil) -> Result<(), QuadratureError> {
        if stencil.kind() != SingularityKind::Log {
            return Err(QuadratureError::InvalidInput(
                "curve rules need a logarithmic stencil".into(),
            ));
        }
        let k = stencil.half_width();
        if 2 * k + 1 >= self.len() {
            return Err(QuadratureError::InvalidInput(format!(
                "stencil of half-width {k} does not fit on {} nodes",
                self.len()
            )));
        }
        Ok(())
    }

    fn check_index(&self, m: usize) -> Result<(), QuadratureError> {
        if m >= self.len() {
            return Err(QuadratureError::InvalidInput(format!(
                "target index {m} out of range for {} nodes",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Weights to be dotted with density samples to approximate a layer
/// potential at node `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorRow<T> {
    pub target: usize,
    pub weights: Vec<T>,
}

impl<T> OperatorRow<T>
where
    T: Copy + std::ops::Mul<Output = T> + std::iter::Sum<T>,
{
    pub fn apply(&self, density: &[T]) -> T {
        self.weights.iter().zip(density).map(|(&w, &d)| w * d).sum()
    }
}

fn neighbours(m: usize, j: usize, n: usize) -> (usize, usize) {
    ((m + j) % n, (m + n - j % n) % n)
}

/// Laplace single layer `int -log r tau ds` at node `m`, corrected to order
/// `2K + 2`.
pub fn laplace_slp_row(
    dc: &DiscreteCurve,
    m: usize,
    stencil: &CorrectionStencil,
) -> Result<OperatorRow<f64>, QuadratureError> {
    dc.check_stencil(stencil)?;
    dc.check_index(m)?;
    let h = dc.h();
    let target = dc.jet(m);
    let mut weights: Vec<f64> = dc
        .jets()
        .iter()
        .enumerate()
        .map(|(i, src)| {
            if i == m {
                0.0
            } else {
                -(target.pos - src.pos).norm().ln() * src.speed * h
            }
        })
        .collect();
    add_log_correction(&mut weights, dc, m, stencil, |i| dc.jet(i).speed);
    let sm = target.speed;
    weights[m] += -sm * h * (sm * h).ln();
    Ok(OperatorRow { target: m, weights })
}

/// Adds `h sum_j w_j (f(m+j) + f(m-j))` (with `j = 0` counted twice).
fn add_log_correction<T>(
    weights: &mut [T],
    dc: &DiscreteCurve,
    m: usize,
    stencil: &CorrectionStencil,
    factor: impl Fn(usize) -> T,
) where
    T: Copy + std::ops::AddAssign + std::ops::Mul<f64, Output = T>,
{
    let n = dc.len();
    let h = dc.h();
    for (j, &w) in stencil.weights().iter().enumerate() {
        let (a, b) = neighbours(m, j, n);
        weights[a] += factor(a) * (h * w);
        weights[b] += factor(b) * (h * w);
    }
}

/// Corrected rows of the Helmholtz single layer, double layer and adjoint
/// double layer at node `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct HelmholtzRows {
    pub s: OperatorRow<Complex64>,
    pub d: OperatorRow<Complex64>,
    pub dstar: OperatorRow<Complex64>,
}

pub fn helmholtz_rows(
    dc: &DiscreteCurve,
    m: usize,
    consts: &HelmholtzConstants,
    stencil: &CorrectionStencil,
) -> Result<HelmholtzRows, QuadratureError> {
    dc.check_stencil(stencil)?;
    dc.check_index(m)?;
    let n = dc.len();
    let h = dc.h();
    let target = dc.jet(m);
    let zero = Complex64::new(0.0, 0.0);
    let mut s = vec![zero; n];
    let mut d = vec![zero; n];
    let mut ds = vec![zero; n];
    let k = stencil.half_width();
    let mut fs = vec![zero; n];
    let mut fd = vec![zero; n];
    let mut fds = vec![zero; n];
    for (i, src) in dc.jets().iter().enumerate() {
        if i == m {
            continue;
        }
        let v = helmholtz_values(&KernelPair::on_curve(src, target), consts);
        let w = src.speed * h;
        s[i] = v.s * w;
        d[i] = v.d * w;
        ds[i] = v.dstar * w;
        if cyclic_distance(i, m, n) <= k {
            fs[i] = v.factor_s * src.speed;
            fd[i] = v.factor_d * src.speed;
            fds[i] = v.factor_dstar * src.speed;
        }
    }
    let sm = target.speed;
    fs[m] = Complex64::new(sm / (2.0 * PI), 0.0);
    add_log_correction(&mut s, dc, m, stencil, |i| fs[i]);
    // The double-layer sums start at j = 1; the j = 0 factors vanish.
    add_log_correction(&mut d, dc, m, stencil, |i| fd[i]);
    add_log_correction(&mut ds, dc, m, stencil, |i| fds[i]);
    s[m] += (consts.c_gamma() - (sm * h).ln()) * (h / (2.0 * PI) * sm);
    d[m] += h * target.c0 * sm;
    ds[m] += h * target.c0 * sm;
    Ok(HelmholtzRows {
        s: OperatorRow {
            target: m,
            weights: s,
        },
        d: OperatorRow {
            target: m,
            weights: d,
        },
        dstar: OperatorRow {
            target: m,
            weights: ds,
        },
    })
}

pub fn helmholtz_s_row(
    dc: &DiscreteCurve,
    m: usize,
    consts: &HelmholtzConstants,
    stencil: &CorrectionStencil,
) -> Result<OperatorRow<Complex64>, QuadratureError> {
    Ok(helmholtz_rows(dc, m, consts, stencil)?.s)
}

pub fn helmholtz_d_row(
    dc: &DiscreteCurve,
    m: usize,
    consts: &HelmholtzConstants,
    stencil: &CorrectionStencil,
) -> Result<OperatorRow<Complex64>, QuadratureError> {
    Ok(helmholtz_rows(dc, m, consts, stencil)?.d)
}

pub fn helmholtz_dstar_row(
    dc: &DiscreteCurve,
    m: usize,
    consts: &HelmholtzConstants,
    stencil: &CorrectionStencil,
) -> Result<OperatorRow<Complex64>, QuadratureError> {
    Ok(helmholtz_rows(dc, m, consts, stencil)?.dstar)
}

fn cyclic_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(n - d)
}

/// Row of 2x2 blocks for the Stokes single and double layers at node `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct StokesRows {
    pub target: usize,
    pub s: Vec<Matrix2<f64>>,
    pub d: Vec<Matrix2<f64>>,
}

/// Stokes rows: the `-log r I / 4pi` part of the single layer uses the
/// corrected Laplace rule, everything else the trapezoidal rule with the
/// analytic diagonal limits.
pub fn stokes_rows(
    dc: &DiscreteCurve,
    m: usize,
    stencil: &CorrectionStencil,
) -> Result<StokesRows, QuadratureError> {
    let log_row = laplace_slp_row(dc, m, stencil)?;
    let h = dc.h();
    let target = dc.jet(m);
    let four_pi = 4.0 * PI;
    let mut s = Vec::with_capacity(dc.len());
    let mut d = Vec::with_capacity(dc.len());
    for (i, src) in dc.jets().iter().enumerate() {
        let w = src.speed * h;
        let (rr, dk) = if i == m {
            stokes_diagonal_limits(target)
        } else {
            let p = KernelPair::on_curve(src, target);
            let (_, dk) = stokes_kernels(&p).expect("distinct nodes");
            (p.r_vec * p.r_vec.transpose() / (p.r * p.r), dk)
        };
        s.push(Matrix2::identity() * (log_row.weights[i] / four_pi) + rr * (w / four_pi));
        d.push(dk * w);
    }
    Ok(StokesRows { target: m, s, d })
}

/// Kress weights `R_d`, `d = 0..N-1`, for `int_0^2pi log(4 sin^2((t-s)/2)) f(s) ds`
/// on an even grid; the full matrix is the circulant `R_jk = R_((j-k) mod N)`.
pub fn kress_log_weights(n: usize) -> Result<Vec<f64>, QuadratureError> {
    if n % 2 != 0 || n < 4 {
        return Err(QuadratureError::InvalidInput(format!(
            "Kress rule needs an even number of nodes, got {n}"
        )));
    }
    let half = n / 2;
    let nf = n as f64;
    Ok((0..n)
        .map(|d| {
            let sum: f64 = (1..half)
                .map(|m| {
                    // cos(2 pi m d / N) with the argument reduced exactly
                    let phase = (m * d) % n;
                    (2.0 * PI * phase as f64 / nf).cos() / m as f64
                })
                .sum();
            let nyquist = if d % 2 == 0 { 1.0 } else { -1.0 };
            -4.0 * PI / nf * sum - 4.0 * PI / (nf * nf) * nyquist
        })
        .collect())
}

/// Dense Kress matrix `R`.
pub fn kress_log_matrix(n: usize) -> Result<DMatrix<f64>, QuadratureError> {
    let r = kress_log_weights(n)?;
    Ok(DMatrix::from_fn(n, n, |j, k| r[(j + n - k) % n]))
}

/// Which Helmholtz layer operator to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    S,
    D,
    Dstar,
}

/// Kress discretization of a Helmholtz layer operator: the kernel is split as
/// `K1 log(4 sin^2((t-s)/2)) + K2`, `K1` is integrated with [`kress_log_weights`]
/// and `K2` with the trapezoidal rule.
pub fn kress_helmholtz_operator(
    dc: &DiscreteCurve,
    consts: &HelmholtzConstants,
    which: LayerKind,
) -> Result<DMatrix<Complex64>, QuadratureError> {
    let n = dc.len();
    let r = kress_log_weights(n)?;
    let h = dc.h();
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let target = dc.jet(j);
            (0..n)
                .map(|k| {
                    let src = dc.jet(k);
                    if k == j {
                        let k2 = match which {
                            LayerKind::S => {
                                (consts.c_gamma() - src.speed.ln()) * (src.speed / (2.0 * PI))
                            }
                            LayerKind::D | LayerKind::Dstar => {
                                Complex64::new(target.c0 * src.speed, 0.0)
                            }
                        };
                        let k1 = match which {
                            LayerKind::S => Complex64::new(-src.speed / (4.0 * PI), 0.0),
                            _ => Complex64::new(0.0, 0.0),
                        };
                        return k1 * r[0] + k2 * h;
                    }
                    let v = helmholtz_values(&KernelPair::on_curve(src, target), consts);
                    // -log r = -log(4 sin^2)/2 + smooth, so the log(4 sin^2)
                    // coefficient of a kernel with -log r factor f is -f/2.
                    let (kernel, factor) = match which {
                        LayerKind::S => (v.s, v.factor_s),
                        LayerKind::D => (v.d, v.factor_d),
                        LayerKind::Dstar => (v.dstar, v.factor_dstar),
                    };
                    let k1 = -0.5 * factor * src.speed;
                    let k2 = kernel * src.speed - k1 * log_four_sin2(j, k, n);
                    k1 * r[(j + n - k) % n] + k2 * h
                })
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(n, n, |j, k| rows[j][k]))
}

fn log_four_sin2(j: usize, k: usize, n: usize) -> f64 {
    let d = (j + n - k) % n;
    let half_angle = PI * d as f64 / n as f64;
    (4.0 * half_angle.sin().powi(2)).ln()
}

/// Kress discretization of the Laplace single layer `int -log r tau ds`.
pub fn kress_laplace_row(
    dc: &DiscreteCurve,
    m: usize,
    kress: &[f64],
) -> Result<OperatorRow<f64>, QuadratureError> {
    dc.check_index(m)?;
    let n = dc.len();
    if kress.len() != n {
        return Err(QuadratureError::InvalidInput(format!(
            "{} Kress weights for {n} nodes",
            kress.len()
        )));
    }
    let h = dc.h();
    let target = dc.jet(m);
    let weights = (0..n)
        .map(|k| {
            let src = dc.jet(k);
            let k1 = -0.5 * src.speed;
            let k2 = if k == m {
                -src.speed * src.speed.ln()
            } else {
                -(target.pos - src.pos).norm().ln() * src.speed - k1 * log_four_sin2(m, k, n)
            };
            k1 * kress[(m + n - k) % n] + k2 * h
        })
        .collect();
    Ok(OperatorRow { target: m, weights })
}

/// Kress discretization of the Stokes single and double layers at node `m`.
pub fn kress_stokes_rows(
    dc: &DiscreteCurve,
    m: usize,
    kress: &[f64],
) -> Result<StokesRows, QuadratureError> {
    let log_row = kress_laplace_row(dc, m, kress)?;
    let h = dc.h();
    let target = dc.jet(m);
    let four_pi = 4.0 * PI;
    let mut s = Vec::with_capacity(dc.len());
    let mut d = Vec::with_capacity(dc.len());
    for (i, src) in dc.jets().iter().enumerate() {
        let w = src.speed * h;
        let (rr, dk) = if i == m {
            stokes_diagonal_limits(target)
        } else {
            let p = KernelPair::on_curve(src, target);
            let (_, dk) = stokes_kernels(&p).expect("distinct nodes");
            (p.r_vec * p.r_vec.transpose() / (p.r * p.r), dk)
        };
        s.push(Matrix2::identity() * (log_row.weights[i] / four_pi) + rr * (w / four_pi));
        d.push(dk * w);
    }
    Ok(StokesRows { target: m, s, d })
}

/// An on-grid correction given by a third-party table: the punctured rule's
/// entry at offset `o != 0` is scaled by `1 + w_o`. The singular node itself
/// gets no weight.
#[derive(Debug, Clone, PartialEq)]
pub struct OnGridCorrection {
    offsets: Vec<(i64, f64)>,
}

impl OnGridCorrection {
    pub fn new(offsets: Vec<(i64, f64)>) -> Result<Self, QuadratureError> {
        if offsets.is_empty() {
            return Err(QuadratureError::InvalidInput(
                "empty correction table".into(),
            ));
        }
        for &(o, w) in &offsets {
            if o == 0 || !w.is_finite() {
                return Err(QuadratureError::InvalidInput(format!(
                    "correction offset {o} with weight {w}: offsets must be nonzero, weights finite"
                )));
            }
        }
        Ok(Self { offsets })
    }

    pub fn offsets(&self) -> &[(i64, f64)] {
        &self.offsets
    }

    pub fn reach(&self) -> usize {
        self.offsets
            .iter()
            .map(|&(o, _)| o.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Applies the correction in place to a punctured row with target `m`.
    pub fn apply<T>(&self, weights: &mut [T], m: usize) -> Result<(), QuadratureError>
    where
        T: Copy + std::ops::AddAssign + std::ops::Mul<f64, Output = T>,
    {
        let n = weights.len();
        if 2 * self.reach() + 1 >= n {
            return Err(QuadratureError::InvalidInput(format!(
                "correction of reach {} does not fit on {n} nodes",
                self.reach()
            )));
        }
        for &(o, w) in &self.offsets {
            let i = (m as i64 + o).rem_euclid(n as i64) as usize;
            let base = weights[i];
            weights[i] += base * w;
        }
        Ok(())
    }
}

/// Punctured trapezoidal rows of the Helmholtz S and D operators at node
/// `m`, with zero diagonal.
pub fn punctured_helmholtz_rows(
    dc: &DiscreteCurve,
    m: usize,
    consts: &HelmholtzConstants,
) -> Result<HelmholtzRows, QuadratureError> {
    dc.check_index(m)?;
    let n = dc.len();
    let h = dc.h();
    let target = dc.jet(m);
    let zero = Complex64::new(0.0, 0.0);
    let mut s = vec![zero; n];
    let mut d = vec![zero; n];
    let mut ds = vec![zero; n];
    for (i, src) in dc.jets().iter().enumerate() {
        if i == m {
            continue;
        }
        let v = helmholtz_values(&KernelPair::on_curve(src, target), consts);
        let w = src.speed * h;
        s[i] = v.s * w;
        d[i] = v.d * w;
        ds[i] = v.dstar * w;
    }
    Ok(HelmholtzRows {
        s: OperatorRow {
            target: m,
            weights: s,
        },
        d: OperatorRow {
            target: m,
            weights: d,
        },
        dstar: OperatorRow {
            target: m,
            weights: ds,
        },
    })
}
