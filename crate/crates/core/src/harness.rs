//! Experiment drivers: JSON problem configs, convergence sweeps, the
//! conditioning table, field sampling, external stencil tables and CSV
//! output.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CurveDescriptor, GeometryError, ParametricCurve, Vec2};
use crate::kernels::{HelmholtzConstants, KernelError};
use crate::nystrom::{
    assemble_helmholtz_coupled, assemble_stokes, cond_2norm, eval_potential, laplace_slp_apply,
    point_source_field, solve_direct, solve_gmres, DenseOperator, NystromError, QuadratureMethod,
    Representation, SolveMethod, SolveReport,
};
use crate::quadrature::{DiscreteCurve, OnGridCorrection, QuadratureError, TrapezoidGrid};
use crate::zetaweights::{build_log_stencil, WeightsError};

/// Errors at or below this level are roundoff.
pub const SATURATION_FLOOR: f64 = 1e-13;
/// Points enter EOC fits only while their error exceeds this.
pub const FIT_THRESHOLD: f64 = 100.0 * SATURATION_FLOOR;
pub const DEFAULT_GMRES_TOL: f64 = 1e-14;
pub const DEFAULT_GMRES_MAX_ITER: usize = 2000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("not supported: {0}")]
    NotSupported(String),
    #[error("GMRES did not converge: {0}")]
    NonConvergence(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Nystrom(#[from] NystromError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Weights(#[from] WeightsError),
}

impl HarnessError {
    /// Process exit code: 1 for numerical failure, 2 for usage or config errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_)
            | HarnessError::Parse { .. }
            | HarnessError::NotSupported(_)
            | HarnessError::Io { .. }
            | HarnessError::Geometry(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// On-curve single layer applied to a smooth density.
    LaplaceSlp,
    HelmholtzDirichlet,
    Stokes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
pub enum QuadratureSpec {
    Zeta {
        #[serde(rename = "K")]
        k: usize,
    },
    Kress,
    External {
        path: String,
    },
}

impl QuadratureSpec {
    pub fn label(&self) -> String {
        match self {
            QuadratureSpec::Zeta { k } => format!("zeta{}", 2 * k + 2),
            QuadratureSpec::Kress => "kress".into(),
            QuadratureSpec::External { path } => format!("external:{path}"),
        }
    }
}

/// Where reference values come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
pub enum ReferenceSpec {
    /// Point-source field (Helmholtz known-solution mode).
    Exact,
    Kress {
        n: usize,
    },
    Zeta {
        #[serde(rename = "K")]
        k: usize,
        n: usize,
    },
}

/// `eta` in `I/2 + D - i eta S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    #[default]
    Kappa,
    RealPart,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSource {
    pub x: f64,
    pub y: f64,
    #[serde(default = "one")]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

fn one() -> f64 {
    1.0
}

/// A wavenumber given as a real number or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaInput {
    Real(f64),
    Pair([f64; 2]),
}

impl KappaInput {
    pub fn value(self) -> Complex64 {
        match self {
            KappaInput::Real(r) => Complex64::new(r, 0.0),
            KappaInput::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

/// One wavenumber or a list; `[re, im]` is read as a single value, so
/// lists of complex wavenumbers are written `[[re, im], ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaList {
    One(KappaInput),
    Many(Vec<KappaInput>),
}

impl Default for KappaList {
    fn default() -> Self {
        KappaList::Many(Vec::new())
    }
}

impl KappaList {
    pub fn values(&self) -> Vec<Complex64> {
        match self {
            KappaList::One(k) => vec![k.value()],
            KappaList::Many(ks) => ks.iter().map(|k| k.value()).collect(),
        }
    }

    fn is_empty(&self) -> bool {
        matches!(self, KappaList::Many(v) if v.is_empty())
    }
}

/// Rectangular sampling grid for `field`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub problem: ProblemKind,
    #[serde(default)]
    pub curve: CurveDescriptor,
    /// One or more wavenumbers; Helmholtz only.
    #[serde(default)]
    pub kappa: KappaList,
    /// Wavelengths across the curve diameter; sets a real wavenumber.
    #[serde(default)]
    pub wavelengths: Option<f64>,
    #[serde(default)]
    pub coupling: Coupling,
    pub quadratures: Vec<QuadratureSpec>,
    #[serde(rename = "N")]
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub sources: Option<Vec<PointSource>>,
    #[serde(default)]
    pub targets: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub reference: Option<ReferenceSpec>,
    #[serde(default = "default_solver")]
    pub solver: SolveMethod,
    #[serde(default = "default_tol")]
    pub gmres_tol: f64,
    #[serde(default = "default_max_iter")]
    pub gmres_max_iter: usize,
    /// `u_inf = (rate * x2, 0)` for Stokes.
    #[serde(default = "default_shear")]
    pub shear_rate: f64,
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

fn default_solver() -> SolveMethod {
    SolveMethod::Direct
}
fn default_tol() -> f64 {
    DEFAULT_GMRES_TOL
}
fn default_max_iter() -> usize {
    DEFAULT_GMRES_MAX_ITER
}
fn default_shear() -> f64 {
    5.0
}

/// Three unit sources at radius 0.4.
pub fn default_sources() -> Vec<PointSource> {
    (0..3)
        .map(|l| {
            let a = 2.0 * PI * l as f64 / 3.0;
            PointSource {
                x: 0.4 * a.cos(),
                y: 0.4 * a.sin(),
                re: 1.0,
                im: 0.0,
            }
        })
        .collect()
}

/// Eight test points on the circle of radius 2.
pub fn default_targets() -> Vec<[f64; 2]> {
    (0..8)
        .map(|l| {
            let a = 2.0 * PI * l as f64 / 8.0;
            [2.0 * a.cos(), 2.0 * a.sin()]
        })
        .collect()
}

/// Smooth periodic density used by the Laplace sweep.
pub fn laplace_test_density(t: f64) -> f64 {
    (t.cos() + 0.5 * (2.0 * t).sin()).exp()
}

impl ProblemConfig {
    pub fn from_json(text: &str, path: &str) -> Result<Self, HarnessError> {
        let cfg: ProblemConfig = serde_json::from_str(text).map_err(|e| HarnessError::Parse {
            path: path.to_string(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let cfg = |m: String| Err(HarnessError::Config(m));
        if self.n_list.is_empty() {
            return cfg("`N` must list at least one grid size".into());
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| n < 16) {
            return cfg(format!("grid size {n} is below 16"));
        }
        if self.quadratures.is_empty() {
            return cfg("`quadratures` must not be empty".into());
        }
        if !(self.gmres_tol > 0.0) || self.gmres_max_iter == 0 {
            return cfg("GMRES tolerance and iteration limit must be positive".into());
        }
        let curve = self.curve.build()?;
        if self.problem == ProblemKind::HelmholtzDirichlet {
            let kappas = self.kappas()?;
            if kappas.is_empty() {
                return cfg("Helmholtz problems need `kappa` or `wavelengths`".into());
            }
            for k in kappas {
                HelmholtzConstants::new(k)?;
            }
            for s in self.sources() {
                if !curve.encloses(Vec2::new(s.x, s.y)) {
                    return cfg(format!("source ({}, {}) is not inside the curve", s.x, s.y));
                }
            }
        } else if !self.kappa.is_empty() || self.wavelengths.is_some() {
            return cfg("`kappa`/`wavelengths` only apply to helmholtz_dirichlet".into());
        }
        if self.problem != ProblemKind::LaplaceSlp {
            for t in self.targets() {
                if curve.encloses(Vec2::new(t[0], t[1])) {
                    return cfg(format!(
                        "target ({}, {}) is not outside the curve",
                        t[0], t[1]
                    ));
                }
            }
        }
        if let Some(ReferenceSpec::Exact) = self.reference {
            if self.problem != ProblemKind::HelmholtzDirichlet {
                return cfg("an exact reference exists only for helmholtz_dirichlet".into());
            }
        }
        for q in &self.quadratures {
            if let QuadratureSpec::Zeta { k } = q {
                if *k > crate::zetaweights::MAX_K {
                    return cfg(format!("K = {k} exceeds {}", crate::zetaweights::MAX_K));
                }
            }
        }
        Ok(())
    }

    /// Wavenumbers after resolving `wavelengths`.
    pub fn kappas(&self) -> Result<Vec<Complex64>, HarnessError> {
        let mut ks = self.kappa.values();
        if let Some(nl) = self.wavelengths {
            if !(nl > 0.0) {
                return Err(HarnessError::Config(
                    "`wavelengths` must be positive".into(),
                ));
            }
            let curve = self.curve.build()?;
            let from_wl = 2.0 * PI * nl / curve_diameter(&curve, 2048);
            if ks.is_empty() {
                ks.push(Complex64::new(from_wl, 0.0));
            } else if ks.len() != 1 || (ks[0] - from_wl).norm() > 1e-6 * from_wl {
                return Err(HarnessError::Config(format!(
                    "`kappa` disagrees with `wavelengths` (which implies {from_wl:.6})"
                )));
            }
        }
        Ok(ks)
    }

    pub fn sources(&self) -> Vec<PointSource> {
        self.sources.clone().unwrap_or_else(default_sources)
    }

    pub fn targets(&self) -> Vec<[f64; 2]> {
        self.targets.clone().unwrap_or_else(default_targets)
    }

    fn reference(&self) -> ReferenceSpec {
        self.reference.clone().unwrap_or(match self.problem {
            ProblemKind::HelmholtzDirichlet => ReferenceSpec::Exact,
            ProblemKind::Stokes => ReferenceSpec::Kress { n: 2000 },
            ProblemKind::LaplaceSlp => ReferenceSpec::Kress { n: 2048 },
        })
    }

    fn eta(&self, kappa: Complex64) -> Complex64 {
        match self.coupling {
            Coupling::Kappa => kappa,
            Coupling::RealPart => Complex64::new(kappa.re, 0.0),
        }
    }
}

/// Largest distance between two of `samples` points on the curve.
pub fn curve_diameter(curve: &ParametricCurve, samples: usize) -> f64 {
    let pts: Vec<Vec2> = (0..samples)
        .map(|i| curve.position(2.0 * PI * i as f64 / samples as f64))
        .collect();
    pts.iter()
        .flat_map(|p| pts.iter().map(move |q| (p - q).norm()))
        .fold(0.0, f64::max)
}

/// Quadrature table read from a text file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalStencilTable {
    pub name: String,
    pub order: f64,
    pub on_grid: bool,
    pub rows: Vec<(f64, f64)>,
}

impl ExternalStencilTable {
    /// Offsets must be nonzero integers; each weight multiplies the
    /// punctured-rule entry at that offset by `1 + weight`.
    pub fn to_correction(&self) -> Result<OnGridCorrection, HarnessError> {
        if !self.on_grid {
            return Err(HarnessError::NotSupported(format!(
                "table `{}` has `grid: off`; off-grid correction nodes cannot be assembled",
                self.name
            )));
        }
        let offsets = self
            .rows
            .iter()
            .map(|&(o, w)| {
                if o.fract() != 0.0 {
                    Err(HarnessError::Config(format!(
                        "table `{}`: offset {o} is not an integer",
                        self.name
                    )))
                } else {
                    Ok((o as i64, w))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(OnGridCorrection::new(offsets)?)
    }
}

/// Parse the `name:`/`order:`/`grid:` header and `offset weight` rows.
pub fn parse_stencil_table(text: &str, path: &str) -> Result<ExternalStencilTable, HarnessError> {
    let err = |line: usize, msg: String| HarnessError::Parse {
        path: path.to_string(),
        line,
        msg,
    };
    let (mut name, mut order, mut grid) = (None, None, None);
    let mut rows = Vec::new();
    let mut last = 0;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        last = line_no;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some((key, value)) = line.split_once(':') {
            if !rows.is_empty() {
                return Err(err(line_no, "header line after data rows".into()));
            }
            let value = value.trim();
            match key.trim() {
                "name" => name = Some(value.to_string()),
                "order" => {
                    let o: f64 = value
                        .parse()
                        .map_err(|_| err(line_no, format!("bad order `{value}`")))?;
                    if !(o >= 2.0) || !o.is_finite() {
                        return Err(err(line_no, format!("order {o} is below 2")));
                    }
                    order = Some(o);
                }
                "grid" => {
                    grid = Some(match value {
                        "on" => true,
                        "off" => false,
                        _ => {
                            return Err(err(
                                line_no,
                                format!("grid must be `on` or `off`, got `{value}`"),
                            ))
                        }
                    })
                }
                other => return Err(err(line_no, format!("unknown header `{other}`"))),
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(err(
                line_no,
                format!("expected `offset weight`, got `{line}`"),
            ));
        }
        let parse = |s: &str| -> Result<f64, HarnessError> {
            let v: f64 = s
                .parse()
                .map_err(|_| err(line_no, format!("bad number `{s}`")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(err(line_no, format!("non-finite value `{s}`")))
            }
        };
        rows.push((parse(fields[0])?, parse(fields[1])?));
    }
    let line = last.max(1);
    let name = name.ok_or_else(|| err(line, "missing `name:` header".into()))?;
    let order = order.ok_or_else(|| err(line, "missing `order:` header".into()))?;
    let on_grid = grid.ok_or_else(|| err(line, "missing `grid:` header".into()))?;
    if rows.is_empty() {
        return Err(err(line, "no `offset weight` rows".into()));
    }
    Ok(ExternalStencilTable {
        name,
        order,
        on_grid,
        rows,
    })
}

pub fn ingest_stencil_table(path: &Path) -> Result<ExternalStencilTable, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_stencil_table(&text, &path.display().to_string())
}

/// Resolved quadrature method plus its nominal order.
fn resolve(q: &QuadratureSpec) -> Result<(QuadratureMethod, Option<f64>), HarnessError> {
    Ok(match q {
        QuadratureSpec::Zeta { k } => {
            let s = build_log_stencil(*k)?;
            let order = s.order();
            (QuadratureMethod::Zeta(s), Some(order))
        }
        QuadratureSpec::Kress => (QuadratureMethod::Kress, None),
        QuadratureSpec::External { path } => {
            let t = ingest_stencil_table(Path::new(path))?;
            (
                QuadratureMethod::External(t.to_correction()?),
                Some(t.order),
            )
        }
    })
}

fn usable(method: &QuadratureMethod, n: usize) -> bool {
    match method {
        QuadratureMethod::Zeta(s) => 2 * s.half_width() + 1 < n,
        QuadratureMethod::Kress => n % 2 == 0,
        QuadratureMethod::External(c) => 2 * c.reach() < n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub method: String,
    pub order: Option<f64>,
    pub kappa_re: Option<f64>,
    pub kappa_im: Option<f64>,
    pub max_rel_error: f64,
    pub assemble_seconds: f64,
    pub solve_seconds: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EocFit {
    pub method: String,
    pub order: Option<f64>,
    pub kappa_re: Option<f64>,
    pub kappa_im: Option<f64>,
    /// `None` when fewer than two points lie above the saturation threshold.
    pub eoc: Option<f64>,
    pub fit_n_min: Option<usize>,
    pub fit_n_max: Option<usize>,
    pub fit_points: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub fits: Vec<EocFit>,
}

/// Least-squares slope of `-log(error)` against `log N` over points with
/// error above [`FIT_THRESHOLD`]. Returns `(eoc, used points)`.
pub fn fit_eoc(points: &[(usize, f64)]) -> (Option<f64>, Vec<(usize, f64)>) {
    let used: Vec<(usize, f64)> = points
        .iter()
        .copied()
        .filter(|&(_, e)| e.is_finite() && e > FIT_THRESHOLD)
        .collect();
    if used.len() < 2 {
        return (None, used);
    }
    let xs: Vec<f64> = used.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = used.iter().map(|&(_, e)| e.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    (Some(-sxy / sxx), used)
}

impl ConvergenceReport {
    fn push_fits(&mut self) {
        let mut keys: Vec<(String, Option<f64>, Option<f64>, Option<f64>)> = Vec::new();
        for r in &self.rows {
            let key = (r.method.clone(), r.order, r.kappa_re, r.kappa_im);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        self.fits = keys
            .into_iter()
            .map(|(method, order, kre, kim)| {
                let pts: Vec<(usize, f64)> = self
                    .rows
                    .iter()
                    .filter(|r| r.method == method && r.kappa_re == kre && r.kappa_im == kim)
                    .map(|r| (r.n, r.max_rel_error))
                    .collect();
                let (eoc, used) = fit_eoc(&pts);
                EocFit {
                    method,
                    order,
                    kappa_re: kre,
                    kappa_im: kim,
                    eoc,
                    fit_n_min: used.iter().map(|p| p.0).min(),
                    fit_n_max: used.iter().map(|p| p.0).max(),
                    fit_points: used.len(),
                }
            })
            .collect();
    }

    pub fn fit(&self, method: &str, kappa: Option<Complex64>) -> Option<&EocFit> {
        self.fits.iter().find(|f| {
            f.method == method
                && match kappa {
                    Some(k) => f.kappa_re == Some(k.re) && f.kappa_im == Some(k.im),
                    None => true,
                }
        })
    }

    pub fn errors(&self, method: &str, kappa: Option<Complex64>) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| {
                r.method == method
                    && kappa.map_or(true, |k| {
                        r.kappa_re == Some(k.re) && r.kappa_im == Some(k.im)
                    })
            })
            .map(|r| (r.n, r.max_rel_error))
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        write_records(path, &self.rows)
    }

    pub fn write_fits_csv(&self, path: &Path) -> Result<(), HarnessError> {
        write_records(path, &self.fits)
    }
}

/// Serialize records with a header line.
pub fn write_records<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn solve<T>(
    cfg: &ProblemConfig,
    method: SolveMethod,
    a: &DMatrix<T>,
    b: &DVector<T>,
) -> Result<SolveReport<T>, HarnessError>
where
    T: nalgebra::ComplexField<RealField = f64> + Copy,
{
    match method {
        SolveMethod::Direct => Ok(solve_direct(a, b)?),
        SolveMethod::Gmres => {
            let r = solve_gmres(a, b, cfg.gmres_tol, cfg.gmres_max_iter)?;
            if !r.converged {
                return Err(HarnessError::NonConvergence(format!(
                    "residual {:.3e} after {} iterations (dimension {})",
                    r.residual,
                    r.iterations,
                    b.len()
                )));
            }
            Ok(r)
        }
    }
}

/// Solution of one discretized problem, evaluated at the test targets.
struct Sample {
    values: Vec<Complex64>,
    assemble_seconds: f64,
    solve_seconds: f64,
    iterations: usize,
}

fn to_points(ts: &[[f64; 2]]) -> Vec<Vec2> {
    ts.iter().map(|t| Vec2::new(t[0], t[1])).collect()
}

fn helmholtz_sample(
    cfg: &ProblemConfig,
    curve: &ParametricCurve,
    kappa: Complex64,
    method: &QuadratureMethod,
    n: usize,
    solver: SolveMethod,
    targets: &[Vec2],
) -> Result<(Sample, DVector<Complex64>, DiscreteCurve), HarnessError> {
    let consts = HelmholtzConstants::new(kappa)?;
    let eta = cfg.eta(kappa);
    let dc = DiscreteCurve::new(curve, TrapezoidGrid::new(n)?)?;
    let t0 = Instant::now();
    let DenseOperator::Complex(a) = assemble_helmholtz_coupled(&dc, &consts, eta, method)? else {
        unreachable!("Helmholtz operators are complex")
    };
    let assemble_seconds = t0.elapsed().as_secs_f64();
    let sources = sources_of(cfg);
    let b = DVector::from_fn(n, |i, _| {
        point_source_field(&consts, &sources, dc.jet(i).pos)
    });
    let t1 = Instant::now();
    let sol = solve(cfg, solver, &a, &b)?;
    let solve_seconds = t1.elapsed().as_secs_f64();
    let values = eval_potential(
        &dc,
        sol.solution.as_slice(),
        targets,
        Representation::Helmholtz { consts, eta },
    )?;
    Ok((
        Sample {
            values,
            assemble_seconds,
            solve_seconds,
            iterations: sol.iterations,
        },
        sol.solution,
        dc,
    ))
}

fn sources_of(cfg: &ProblemConfig) -> Vec<(Vec2, Complex64)> {
    cfg.sources()
        .iter()
        .map(|s| (Vec2::new(s.x, s.y), Complex64::new(s.re, s.im)))
        .collect()
}

fn stokes_sample(
    cfg: &ProblemConfig,
    curve: &ParametricCurve,
    method: &QuadratureMethod,
    n: usize,
    solver: SolveMethod,
    targets: &[Vec2],
) -> Result<(Sample, DVector<f64>, DiscreteCurve), HarnessError> {
    let dc = DiscreteCurve::new(curve, TrapezoidGrid::new(n)?)?;
    let t0 = Instant::now();
    let DenseOperator::Real(a) = assemble_stokes(&dc, method)? else {
        unreachable!("Stokes operators are real")
    };
    let assemble_seconds = t0.elapsed().as_secs_f64();
    let b = DVector::from_fn(2 * n, |i, _| {
        let u = crate::nystrom::shear_flow(cfg.shear_rate, dc.jet(i / 2).pos);
        -u[i % 2]
    });
    let t1 = Instant::now();
    let sol = solve(cfg, solver, &a, &b)?;
    let solve_seconds = t1.elapsed().as_secs_f64();
    let values = stokes_field(cfg, &dc, &sol.solution, targets)?;
    Ok((
        Sample {
            values,
            assemble_seconds,
            solve_seconds,
            iterations: sol.iterations,
        },
        sol.solution,
        dc,
    ))
}

/// Velocity at targets, interleaved `[u1, u2]` as real parts.
fn stokes_field(
    cfg: &ProblemConfig,
    dc: &DiscreteCurve,
    density: &DVector<f64>,
    targets: &[Vec2],
) -> Result<Vec<Complex64>, HarnessError> {
    let dens: Vec<Complex64> = density.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut u = eval_potential(dc, &dens, targets, Representation::Stokes)?;
    for (i, x) in targets.iter().enumerate() {
        let inf = crate::nystrom::shear_flow(cfg.shear_rate, *x);
        u[2 * i] += inf.x;
        u[2 * i + 1] += inf.y;
    }
    Ok(u)
}

/// Largest pointwise deviation relative to the largest reference value.
/// Vector problems are compared per target.
fn max_rel_error(values: &[Complex64], reference: &[Complex64], per_target: usize) -> f64 {
    let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let scale = reference.chunks(per_target).map(norm).fold(0.0, f64::max);
    values
        .chunks(per_target)
        .zip(reference.chunks(per_target))
        .map(|(a, b)| {
            let d: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            norm(&d)
        })
        .fold(0.0, f64::max)
        / scale.max(f64::MIN_POSITIVE)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn laplace_values(
    curve: &ParametricCurve,
    method: &QuadratureMethod,
    n: usize,
    base: usize,
) -> Result<(Vec<Complex64>, f64), HarnessError> {
    let dc = DiscreteCurve::new(curve, TrapezoidGrid::new(n)?)?;
    let dens: Vec<f64> = dc.grid().nodes().map(laplace_test_density).collect();
    let t0 = Instant::now();
    let all = laplace_slp_apply(&dc, &dens, method)?;
    let secs = t0.elapsed().as_secs_f64();
    Ok((
        (0..base)
            .map(|i| Complex64::new(all[i * (n / base)], 0.0))
            .collect(),
        secs,
    ))
}

/// Error sweep over `N` for every configured quadrature.
pub fn run_convergence(cfg: &ProblemConfig) -> Result<ConvergenceReport, HarnessError> {
    cfg.validate()?;
    let curve = cfg.curve.build()?;
    let methods: Vec<(String, QuadratureMethod, Option<f64>)> = cfg
        .quadratures
        .iter()
        .map(|q| resolve(q).map(|(m, o)| (q.label(), m, o)))
        .collect::<Result<_, _>>()?;
    let reference = cfg.reference();
    let ref_method = |r: &ReferenceSpec| -> Result<(QuadratureMethod, usize), HarnessError> {
        match r {
            ReferenceSpec::Kress { n } => Ok((QuadratureMethod::Kress, *n)),
            ReferenceSpec::Zeta { k, n } => {
                Ok((QuadratureMethod::Zeta(build_log_stencil(*k)?), *n))
            }
            ReferenceSpec::Exact => unreachable!("handled by caller"),
        }
    };
    let targets = to_points(&cfg.targets());
    let mut report = ConvergenceReport::default();
    match cfg.problem {
        ProblemKind::LaplaceSlp => {
            if reference == ReferenceSpec::Exact {
                return Err(HarnessError::Config(
                    "laplace_slp needs a quadrature reference".into(),
                ));
            }
            let (rm, rn) = ref_method(&reference)?;
            let base = cfg.n_list.iter().fold(rn, |g, &n| gcd(g, n));
            if base < 8 {
                return Err(HarnessError::Config(format!(
                    "grid sizes and reference size share only {base} common nodes; need at least 8"
                )));
            }
            let (refv, _) = laplace_values(&curve, &rm, rn, base)?;
            for (label, m, order) in &methods {
                for &n in &cfg.n_list {
                    if !usable(m, n) {
                        continue;
                    }
                    let (v, secs) = laplace_values(&curve, m, n, base)?;
                    report.rows.push(ConvergenceRow {
                        n,
                        method: label.clone(),
                        order: *order,
                        kappa_re: None,
                        kappa_im: None,
                        max_rel_error: max_rel_error(&v, &refv, 1),
                        assemble_seconds: secs,
                        solve_seconds: 0.0,
                        iterations: 0,
                    });
                }
            }
        }
        ProblemKind::HelmholtzDirichlet => {
            for kappa in cfg.kappas()? {
                let consts = HelmholtzConstants::new(kappa)?;
                let refv: Vec<Complex64> = match &reference {
                    ReferenceSpec::Exact => {
                        let src = sources_of(cfg);
                        targets
                            .iter()
                            .map(|&x| point_source_field(&consts, &src, x))
                            .collect()
                    }
                    r => {
                        let (rm, rn) = ref_method(r)?;
                        helmholtz_sample(cfg, &curve, kappa, &rm, rn, SolveMethod::Gmres, &targets)?
                            .0
                            .values
                    }
                };
                for (label, m, order) in &methods {
                    for &n in &cfg.n_list {
                        if !usable(m, n) {
                            continue;
                        }
                        let (s, _, _) =
                            helmholtz_sample(cfg, &curve, kappa, m, n, cfg.solver, &targets)?;
                        report.rows.push(ConvergenceRow {
                            n,
                            method: label.clone(),
                            order: *order,
                            kappa_re: Some(kappa.re),
                            kappa_im: Some(kappa.im),
                            max_rel_error: max_rel_error(&s.values, &refv, 1),
                            assemble_seconds: s.assemble_seconds,
                            solve_seconds: s.solve_seconds,
                            iterations: s.iterations,
                        });
                    }
                }
            }
        }
        ProblemKind::Stokes => {
            if reference == ReferenceSpec::Exact {
                return Err(HarnessError::Config(
                    "stokes needs a quadrature reference".into(),
                ));
            }
            let (rm, rn) = ref_method(&reference)?;
            let refv = stokes_sample(cfg, &curve, &rm, rn, SolveMethod::Gmres, &targets)?
                .0
                .values;
            for (label, m, order) in &methods {
                for &n in &cfg.n_list {
                    if !usable(m, n) {
                        continue;
                    }
                    let (s, _, _) = stokes_sample(cfg, &curve, m, n, cfg.solver, &targets)?;
                    report.rows.push(ConvergenceRow {
                        n,
                        method: label.clone(),
                        order: *order,
                        kappa_re: None,
                        kappa_im: None,
                        max_rel_error: max_rel_error(&s.values, &refv, 2),
                        assemble_seconds: s.assemble_seconds,
                        solve_seconds: s.solve_seconds,
                        iterations: s.iterations,
                    });
                }
            }
        }
    }
    report.push_fits();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Row {
    pub method: String,
    pub order: Option<f64>,
    pub kappa_re: f64,
    pub kappa_im: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub cond: f64,
    pub gmres_iterations: usize,
    pub gmres_residual: f64,
    pub converged: bool,
}

/// Condition number and unpreconditioned GMRES iteration count for every
/// quadrature, wavenumber and grid size of a Helmholtz config.
pub fn run_table1(cfg: &ProblemConfig) -> Result<Vec<Table1Row>, HarnessError> {
    cfg.validate()?;
    if cfg.problem != ProblemKind::HelmholtzDirichlet {
        return Err(HarnessError::Config(
            "table1 needs a helmholtz_dirichlet config".into(),
        ));
    }
    let curve = cfg.curve.build()?;
    let sources = sources_of(cfg);
    let mut rows = Vec::new();
    for kappa in cfg.kappas()? {
        let consts = HelmholtzConstants::new(kappa)?;
        for q in &cfg.quadratures {
            let (method, order) = resolve(q)?;
            for &n in &cfg.n_list {
                if !usable(&method, n) {
                    continue;
                }
                let dc = DiscreteCurve::new(&curve, TrapezoidGrid::new(n)?)?;
                let DenseOperator::Complex(a) =
                    assemble_helmholtz_coupled(&dc, &consts, cfg.eta(kappa), &method)?
                else {
                    unreachable!("Helmholtz operators are complex")
                };
                let b = DVector::from_fn(n, |i, _| {
                    point_source_field(&consts, &sources, dc.jet(i).pos)
                });
                let g = solve_gmres(&a, &b, cfg.gmres_tol, cfg.gmres_max_iter)?;
                rows.push(Table1Row {
                    method: q.label(),
                    order,
                    kappa_re: kappa.re,
                    kappa_im: kappa.im,
                    n,
                    cond: cond_2norm(&a)?,
                    gmres_iterations: g.iterations,
                    gmres_residual: g.residual,
                    converged: g.converged,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldRow {
    pub x: f64,
    pub y: f64,
    /// `Re u` (Helmholtz) or `u1` (Stokes).
    pub a: f64,
    /// `Im u` (Helmholtz) or `u2` (Stokes).
    pub b: f64,
    /// 0 evaluated, 1 inside the near-field band, 2 inside the curve.
    pub mask: u8,
}

impl fmt::Display for FieldRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{}",
            self.x, self.y, self.a, self.b, self.mask
        )
    }
}

/// Solve with the first quadrature at the largest `N` and sample the
/// exterior field on `grid`. Masked points carry NaN values.
pub fn run_field(cfg: &ProblemConfig, grid: &GridSpec) -> Result<Vec<FieldRow>, HarnessError> {
    cfg.validate()?;
    if grid.nx == 0 || grid.ny == 0 {
        return Err(HarnessError::Config("field grid needs nx, ny >= 1".into()));
    }
    let curve = cfg.curve.build()?;
    let (method, _) = resolve(&cfg.quadratures[0])?;
    let n = *cfg.n_list.iter().max().expect("validated");
    let lin = |r: [f64; 2], k: usize, i: usize| {
        if k == 1 {
            r[0]
        } else {
            r[0] + (r[1] - r[0]) * i as f64 / (k - 1) as f64
        }
    };
    let pts: Vec<Vec2> = (0..grid.ny)
        .flat_map(|j| (0..grid.nx).map(move |i| (i, j)))
        .map(|(i, j)| Vec2::new(lin(grid.x, grid.nx, i), lin(grid.y, grid.ny, j)))
        .collect();
    let limit = crate::nystrom::NEAR_FIELD_STEPS * 2.0 * PI / n as f64;
    let probe = DiscreteCurve::new(&curve, TrapezoidGrid::new(n)?)?;
    let masks: Vec<u8> = pts
        .par_iter()
        .map(|&p| {
            if curve.encloses(p) {
                2
            } else if crate::nystrom::distance_to_samples(&probe, p) < limit {
                1
            } else {
                0
            }
        })
        .collect();
    let free: Vec<Vec2> = pts
        .iter()
        .zip(&masks)
        .filter(|(_, &m)| m == 0)
        .map(|(p, _)| *p)
        .collect();
    let values: Vec<(f64, f64)> = match cfg.problem {
        ProblemKind::HelmholtzDirichlet => {
            let kappa = cfg.kappas()?[0];
            let (s, _, _) = helmholtz_sample(cfg, &curve, kappa, &method, n, cfg.solver, &free)?;
            s.values.iter().map(|z| (z.re, z.im)).collect()
        }
        ProblemKind::Stokes => {
            let (s, _, _) = stokes_sample(cfg, &curve, &method, n, cfg.solver, &free)?;
            s.values.chunks(2).map(|c| (c[0].re, c[1].re)).collect()
        }
        ProblemKind::LaplaceSlp => {
            return Err(HarnessError::Config(
                "field needs a helmholtz_dirichlet or stokes config".into(),
            ))
        }
    };
    let mut it = values.into_iter();
    Ok(pts
        .iter()
        .zip(&masks)
        .map(|(p, &mask)| {
            let (a, b) = if mask == 0 {
                it.next().expect("one value per free point")
            } else {
                (f64::NAN, f64::NAN)
            };
            FieldRow {
                x: p.x,
                y: p.y,
                a,
                b,
                mask,
            }
        })
        .collect())
}

/// Field CSV with problem-specific column names.
pub fn write_field_csv(
    path: &Path,
    problem: ProblemKind,
    rows: &[FieldRow],
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    let (a, b) = match problem {
        ProblemKind::Stokes => ("u1", "u2"),
        _ => ("re_u", "im_u"),
    };
    w.write_record(["x", "y", a, b, "mask"])?;
    for r in rows {
        w.write_record([
            r.x.to_string(),
            r.y.to_string(),
            r.a.to_string(),
            r.b.to_string(),
            r.mask.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}
