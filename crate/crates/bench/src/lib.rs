//! Fixtures shared by the benchmarks.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use zetatrap::geometry::{star_curve, Vec2};
use zetatrap::kernels::HelmholtzConstants;
use zetatrap::nystrom::{assemble_helmholtz, point_source_field, DenseOperator, QuadratureMethod};
use zetatrap::quadrature::{DiscreteCurve, TrapezoidGrid};

/// The five-lobed star sampled at `n` nodes.
pub fn star(n: usize) -> DiscreteCurve {
    DiscreteCurve::new(
        &star_curve(1.0, 0.3, 5).unwrap(),
        TrapezoidGrid::new(n).unwrap(),
    )
    .unwrap()
}

/// Helmholtz system with point-source boundary data.
pub fn helmholtz_system(
    n: usize,
    kappa: Complex64,
    method: &QuadratureMethod,
) -> (DMatrix<Complex64>, DVector<Complex64>) {
    let dc = star(n);
    let c = HelmholtzConstants::new(kappa).unwrap();
    let DenseOperator::Complex(a) = assemble_helmholtz(&dc, &c, method).unwrap() else {
        unreachable!("Helmholtz operators are complex")
    };
    let src = [(Vec2::new(0.2, 0.1), Complex64::new(1.0, 0.0))];
    let b = DVector::from_fn(n, |i, _| point_source_field(&c, &src, dc.jet(i).pos));
    (a, b)
}
