//! Zeta-corrected trapezoidal rules for logarithmic and power-law kernel
//! singularities on smooth closed curves, with Nystrom solvers for the
//! Laplace, Helmholtz and Stokes layer potentials built on them.

pub mod geometry;
pub mod harness;
pub mod hiprec;
pub mod kernels;
pub mod nystrom;
pub mod quadrature;
pub mod specfun;
pub mod zetaweights;

pub use geometry::{CurveDescriptor, ParametricCurve, Vec2};
pub use harness::{ExternalStencilTable, ProblemConfig};
pub use kernels::HelmholtzConstants;
pub use nystrom::{DenseOperator, QuadratureMethod, SolveReport};
pub use quadrature::{DiscreteCurve, TrapezoidGrid};
pub use specfun::ComplexScalar;
pub use zetaweights::{CorrectionStencil, SingularityKind};
