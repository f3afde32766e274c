//! Dense Nystrom systems for the Helmholtz and Stokes boundary integral
//! equations, direct and GMRES solvers, conditioning, and off-curve
//! evaluation of the representations.

use std::f64::consts::PI;

use nalgebra::{ComplexField, DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::kernels::{
    helmholtz_values, stokes_kernels, HelmholtzConstants, KernelError, KernelPair,
};
use crate::quadrature::{
    helmholtz_rows, kress_helmholtz_operator, kress_laplace_row, kress_log_weights,
    kress_stokes_rows, laplace_slp_row, punctured_helmholtz_rows, stokes_rows, DiscreteCurve,
    LayerKind, OnGridCorrection, OperatorRow, QuadratureError, StokesRows,
};
use crate::zetaweights::CorrectionStencil;

/// Largest dimension accepted by [`cond_2norm`].
pub const MAX_SVD_DIM: usize = 4096;
/// Off-curve targets must be at least this many parameter steps from the curve.
pub const NEAR_FIELD_STEPS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NystromError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("dimension {dim} exceeds the dense SVD budget {max}")]
    Budget { dim: usize, max: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(
        "target {index} lies {distance:.3e} from the curve, inside the near field {limit:.3e}"
    )]
    NearField {
        index: usize,
        distance: f64,
        limit: f64,
    },
    #[error("not supported: {0}")]
    NotSupported(String),
}

/// Square dense matrix of a discretized operator.
#[derive(Debug, Clone, PartialEq)]
pub enum DenseOperator {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

impl DenseOperator {
    pub fn dim(&self) -> usize {
        match self {
            DenseOperator::Real(m) => m.nrows(),
            DenseOperator::Complex(m) => m.nrows(),
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, DenseOperator::Complex(_))
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        match self {
            DenseOperator::Real(m) => m.map(|v| Complex64::new(v, 0.0)),
            DenseOperator::Complex(m) => m.clone(),
        }
    }

    pub fn cond_2norm(&self) -> Result<f64, NystromError> {
        match self {
            DenseOperator::Real(m) => cond_2norm(m),
            DenseOperator::Complex(m) => cond_2norm(m),
        }
    }
}

/// How the singular part of each operator row is integrated.
#[derive(Debug, Clone, PartialEq)]
pub enum QuadratureMethod {
    Zeta(CorrectionStencil),
    Kress,
    External(OnGridCorrection),
}

impl QuadratureMethod {
    pub fn label(&self) -> String {
        match self {
            QuadratureMethod::Zeta(s) => format!("zeta{}", s.order()),
            QuadratureMethod::Kress => "kress".into(),
            QuadratureMethod::External(_) => "external".into(),
        }
    }
}

fn from_rows<T: nalgebra::Scalar + Copy>(rows: Vec<Vec<T>>) -> DMatrix<T> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, m, |i, j| rows[i][j])
}

/// `A = I/2 + D - i kappa S` for the exterior Dirichlet problem.
pub fn assemble_helmholtz(
    dc: &DiscreteCurve,
    consts: &HelmholtzConstants,
    method: &QuadratureMethod,
) -> Result<DenseOperator, NystromError> {
    assemble_helmholtz_coupled(dc, consts, consts.kappa(), method)
}

/// `A = I/2 + D - i eta S` with an explicit coupling constant `eta`.
pub fn assemble_helmholtz_coupled(
    dc: &DiscreteCurve,
    consts: &HelmholtzConstants,
    eta: Complex64,
    method: &QuadratureMethod,
) -> Result<DenseOperator, NystromError> {
    let n = dc.len();
    let ik = Complex64::i() * eta;
    let half = Complex64::new(0.5, 0.0);
    let a = match method {
        QuadratureMethod::Kress => {
            let s = kress_helmholtz_operator(dc, consts, LayerKind::S)?;
            let d = kress_helmholtz_operator(dc, consts, LayerKind::D)?;
            DMatrix::from_diagonal_element(n, n, half) + d - s * ik
        }
        QuadratureMethod::Zeta(stencil) => {
            let rows = (0..n)
                .into_par_iter()
                .map(|m| {
                    let r = helmholtz_rows(dc, m, consts, stencil)?;
                    Ok(combine(m, half, &r.s, &r.d, ik))
                })
                .collect::<Result<Vec<_>, QuadratureError>>()?;
            from_rows(rows)
        }
        QuadratureMethod::External(corr) => {
            let rows = (0..n)
                .into_par_iter()
                .map(|m| {
                    let mut r = punctured_helmholtz_rows(dc, m, consts)?;
                    corr.apply(&mut r.s.weights, m)?;
                    corr.apply(&mut r.d.weights, m)?;
                    Ok(combine(m, half, &r.s, &r.d, ik))
                })
                .collect::<Result<Vec<_>, QuadratureError>>()?;
            from_rows(rows)
        }
    };
    Ok(DenseOperator::Complex(a))
}

fn combine(
    m: usize,
    half: Complex64,
    s: &OperatorRow<Complex64>,
    d: &OperatorRow<Complex64>,
    ik: Complex64,
) -> Vec<Complex64> {
    let mut row: Vec<Complex64> = d
        .weights
        .iter()
        .zip(&s.weights)
        .map(|(&dv, &sv)| dv - ik * sv)
        .collect();
    row[m] += half;
    row
}

/// `I/2 + S + D` for the Stokes problem, ordered node-major
/// `[u1(0), u2(0), u1(1), ...]`.
pub fn assemble_stokes(
    dc: &DiscreteCurve,
    method: &QuadratureMethod,
) -> Result<DenseOperator, NystromError> {
    let n = dc.len();
    let kress = match method {
        QuadratureMethod::Kress => Some(kress_log_weights(n)?),
        QuadratureMethod::Zeta(_) => None,
        QuadratureMethod::External(_) => {
            return Err(NystromError::NotSupported(
                "external correction tables are only wired into the Helmholtz solver".into(),
            ))
        }
    };
    let rows: Vec<StokesRows> = (0..n)
        .into_par_iter()
        .map(|m| match (method, &kress) {
            (QuadratureMethod::Zeta(st), _) => stokes_rows(dc, m, st),
            (_, Some(r)) => kress_stokes_rows(dc, m, r),
            _ => unreachable!("checked above"),
        })
        .collect::<Result<_, _>>()?;
    let mut a = DMatrix::<f64>::identity(2 * n, 2 * n) * 0.5;
    for (m, row) in rows.iter().enumerate() {
        for i in 0..n {
            let block = row.s[i] + row.d[i];
            for (p, q) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                a[(2 * m + p, 2 * i + q)] += block[(p, q)];
            }
        }
    }
    Ok(DenseOperator::Real(a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Direct,
    Gmres,
}

/// Outcome of a linear solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<T: nalgebra::Scalar> {
    pub solution: DVector<T>,
    pub method: SolveMethod,
    /// Zero for direct solves.
    pub iterations: usize,
    /// `||b - A x|| / ||b||`.
    pub residual: f64,
    pub converged: bool,
    pub cond: Option<f64>,
}

fn relative_residual<T>(a: &DMatrix<T>, x: &DVector<T>, b: &DVector<T>) -> f64
where
    T: ComplexField<RealField = f64> + Copy,
{
    let bn = b.norm();
    let r = (b - a * x).norm();
    if bn == 0.0 {
        r
    } else {
        r / bn
    }
}

/// LU with partial pivoting.
pub fn solve_direct<T>(a: &DMatrix<T>, b: &DVector<T>) -> Result<SolveReport<T>, NystromError>
where
    T: ComplexField<RealField = f64> + Copy,
{
    check_dims(a, b)?;
    let x = a.clone().lu().solve(b).ok_or(NystromError::Singular)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(NystromError::Singular);
    }
    let residual = relative_residual(a, &x, b);
    Ok(SolveReport {
        solution: x,
        method: SolveMethod::Direct,
        iterations: 0,
        residual,
        converged: true,
        cond: None,
    })
}

fn check_dims<T: nalgebra::Scalar>(a: &DMatrix<T>, b: &DVector<T>) -> Result<(), NystromError> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(NystromError::Dimension(format!(
            "{}x{} matrix with right-hand side of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    Ok(())
}

/// Givens rotation `(c, s)` with `c` real, mapping `(a, b)` to `(r, 0)`.
fn givens<T>(a: T, b: T) -> (f64, T, T)
where
    T: ComplexField<RealField = f64> + Copy,
{
    let (na, nb) = (a.modulus(), b.modulus());
    if nb == 0.0 {
        return (1.0, T::zero(), a);
    }
    if na == 0.0 {
        return (0.0, b.conjugate().unscale(nb), T::from_real(nb));
    }
    let t = na.hypot(nb);
    let phase = a.unscale(na);
    (na / t, phase * b.conjugate().unscale(t), phase.scale(t))
}

/// Unrestarted, unpreconditioned GMRES with modified Gram-Schmidt and one
/// reorthogonalization pass. Stops once the relative residual is `<= tol`;
/// failing to get there within `max_iter` steps is reported through
/// `converged = false`, not as an error.
pub fn solve_gmres<T>(
    a: &DMatrix<T>,
    b: &DVector<T>,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport<T>, NystromError>
where
    T: ComplexField<RealField = f64> + Copy,
{
    check_dims(a, b)?;
    let n = b.len();
    let beta = b.norm();
    if beta == 0.0 {
        return Ok(SolveReport {
            solution: DVector::zeros(n),
            method: SolveMethod::Gmres,
            iterations: 0,
            residual: 0.0,
            converged: true,
            cond: None,
        });
    }
    let max_iter = max_iter.min(n).max(1);
    let mut basis: Vec<DVector<T>> = vec![b.unscale(beta)];
    // Columns of the (rotated) Hessenberg matrix.
    let mut r_cols: Vec<Vec<T>> = Vec::new();
    let mut rot: Vec<(f64, T)> = Vec::new();
    let mut g: Vec<T> = vec![T::from_real(beta)];
    let mut iterations = 0;
    let mut estimate = 1.0;
    for k in 0..max_iter {
        let mut w = a * &basis[k];
        let mut hcol = vec![T::zero(); k + 2];
        for _pass in 0..2 {
            for (i, v) in basis.iter().enumerate() {
                let c = v.dotc(&w);
                w.axpy(-c, v, T::one());
                hcol[i] += c;
            }
        }
        let hnext = w.norm();
        hcol[k + 1] = T::from_real(hnext);
        for (i, &(c, s)) in rot.iter().enumerate() {
            let (x, y) = (hcol[i], hcol[i + 1]);
            hcol[i] = x.scale(c) + s * y;
            hcol[i + 1] = y.scale(c) - s.conjugate() * x;
        }
        let (c, s, r) = givens(hcol[k], hcol[k + 1]);
        hcol[k] = r;
        hcol[k + 1] = T::zero();
        rot.push((c, s));
        let gk = g[k];
        g[k] = gk.scale(c);
        g.push(-(s.conjugate() * gk));
        hcol.truncate(k + 1);
        r_cols.push(hcol);
        iterations = k + 1;
        estimate = g[k + 1].modulus() / beta;
        if estimate <= tol || hnext == 0.0 {
            break;
        }
        basis.push(w.unscale(hnext));
    }
    // Back substitution R y = g.
    let m = iterations;
    let mut y = vec![T::zero(); m];
    for i in (0..m).rev() {
        let mut acc = g[i];
        for j in i + 1..m {
            acc -= r_cols[j][i] * y[j];
        }
        y[i] = acc / r_cols[i][i];
    }
    let mut x = DVector::zeros(n);
    for (yi, v) in y.iter().zip(&basis) {
        x.axpy(*yi, v, T::one());
    }
    let residual = relative_residual(a, &x, b);
    Ok(SolveReport {
        solution: x,
        method: SolveMethod::Gmres,
        iterations,
        residual,
        converged: estimate <= tol,
        cond: None,
    })
}

/// `sigma_max / sigma_min` from a dense SVD.
pub fn cond_2norm<T>(a: &DMatrix<T>) -> Result<f64, NystromError>
where
    T: ComplexField<RealField = f64> + Copy,
{
    if a.nrows() > MAX_SVD_DIM || a.ncols() > MAX_SVD_DIM {
        return Err(NystromError::Budget {
            dim: a.nrows().max(a.ncols()),
            max: MAX_SVD_DIM,
        });
    }
    let sv = a.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(if min == 0.0 { f64::INFINITY } else { max / min })
}

/// Representation evaluated away from the curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Representation {
    /// `int -log r tau ds`.
    LaplaceSlp,
    /// `(D - i eta S)[tau]`.
    Helmholtz {
        consts: HelmholtzConstants,
        eta: Complex64,
    },
    /// `(S + D)[tau]`, density interleaved `[t1, t2]` per node; the free
    /// stream is added by the caller.
    Stokes,
}

fn check_far(dc: &DiscreteCurve, targets: &[Vec2]) -> Result<(), NystromError> {
    let limit = NEAR_FIELD_STEPS * dc.h();
    for (index, x) in targets.iter().enumerate() {
        let distance = distance_to_samples(dc, *x);
        if distance < limit {
            return Err(NystromError::NearField {
                index,
                distance,
                limit,
            });
        }
    }
    Ok(())
}

/// Distance from `x` to the nodes, refined on the chord through the two
/// nearest neighbours of the closest node.
pub fn distance_to_samples(dc: &DiscreteCurve, x: Vec2) -> f64 {
    let n = dc.len();
    let (best, _) = dc
        .jets()
        .iter()
        .enumerate()
        .map(|(i, j)| (i, (j.pos - x).norm()))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let p = dc.jet(best).pos;
    let mut d = (p - x).norm();
    for q in [dc.jet((best + 1) % n).pos, dc.jet((best + n - 1) % n).pos] {
        let e = q - p;
        let t = ((x - p).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
        d = d.min((p + e * t - x).norm());
    }
    d
}

/// Plain trapezoidal evaluation of a representation at targets at least
/// `5h` from the curve. Returns one value per target (two per target,
/// interleaved, for Stokes).
pub fn eval_potential(
    dc: &DiscreteCurve,
    density: &[Complex64],
    targets: &[Vec2],
    repr: Representation,
) -> Result<Vec<Complex64>, NystromError> {
    let n = dc.len();
    let per_node = if matches!(repr, Representation::Stokes) {
        2
    } else {
        1
    };
    if density.len() != per_node * n {
        return Err(NystromError::Dimension(format!(
            "density of length {} for {n} nodes",
            density.len()
        )));
    }
    check_far(dc, targets)?;
    let h = dc.h();
    Ok(targets
        .par_iter()
        .flat_map_iter(|&x| {
            let mut acc = [Complex64::new(0.0, 0.0); 2];
            for (i, src) in dc.jets().iter().enumerate() {
                let p = KernelPair::to_point(src, x);
                let w = src.speed * h;
                match repr {
                    Representation::LaplaceSlp => acc[0] += density[i] * (-p.r.ln() * w),
                    Representation::Helmholtz { consts, eta } => {
                        let v = helmholtz_values(&p, &consts);
                        acc[0] += density[i] * (v.d - Complex64::i() * eta * v.s) * w;
                    }
                    Representation::Stokes => {
                        let (s, d) = stokes_kernels(&p).expect("far target");
                        let m: Matrix2<f64> = (s + d) * w;
                        let (t1, t2) = (density[2 * i], density[2 * i + 1]);
                        acc[0] += t1 * m[(0, 0)] + t2 * m[(0, 1)];
                        acc[1] += t1 * m[(1, 0)] + t2 * m[(1, 1)];
                    }
                }
            }
            acc.into_iter().take(per_node)
        })
        .collect())
}

/// Laplace single layer at every node, corrected with `stencil`.
pub fn laplace_slp_apply(
    dc: &DiscreteCurve,
    density: &[f64],
    method: &QuadratureMethod,
) -> Result<Vec<f64>, NystromError> {
    let n = dc.len();
    let kress = match method {
        QuadratureMethod::Kress => Some(kress_log_weights(n)?),
        _ => None,
    };
    (0..n)
        .into_par_iter()
        .map(|m| {
            let row = match method {
                QuadratureMethod::Zeta(st) => laplace_slp_row(dc, m, st)?,
                QuadratureMethod::Kress => {
                    kress_laplace_row(dc, m, kress.as_deref().unwrap_or(&[]))?
                }
                QuadratureMethod::External(c) => {
                    let target = dc.jet(m);
                    let mut w: Vec<f64> = dc
                        .jets()
                        .iter()
                        .enumerate()
                        .map(|(i, s)| {
                            if i == m {
                                0.0
                            } else {
                                -(target.pos - s.pos).norm().ln() * s.speed * dc.h()
                            }
                        })
                        .collect();
                    c.apply(&mut w, m)?;
                    OperatorRow {
                        target: m,
                        weights: w,
                    }
                }
            };
            Ok(row.apply(density))
        })
        .collect()
}

/// `sum_l c_l (i/4) H_0(kappa |x - y_l|)`.
pub fn point_source_field(
    consts: &HelmholtzConstants,
    sources: &[(Vec2, Complex64)],
    x: Vec2,
) -> Complex64 {
    sources
        .iter()
        .map(|&(y, c)| {
            let r = (x - y).norm();
            let (h0, _) = crate::specfun::hankel1_01(consts.kappa() * r);
            c * Complex64::new(0.0, 0.25) * h0
        })
        .sum()
}

/// Free stream `(5 x2, 0)` of the shear-flow problem, scaled by `rate / 5`.
pub fn shear_flow(rate: f64, x: Vec2) -> Vec2 {
    Vec2::new(rate * x.y, 0.0)
}

/// Helper for tests and drivers: `2 pi`.
pub const TWO_PI: f64 = 2.0 * PI;
