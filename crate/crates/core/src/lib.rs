//! Numerical laboratory for approximate three-ball inequalities in periodic
//! homogenization: cell problems, oscillating elliptic solves, Poisson-kernel
//! interpolation and the audits built on them.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below fix the scalar to `f64`, which is what the harness uses.

pub mod audit;
pub mod cell;
pub mod coeff;
pub mod ellipsoid;
pub mod error;
pub mod expr;
pub mod kernel;
pub mod linalg;
pub mod mesh;
pub mod pde;
pub mod scalar;
pub mod sparse;

pub use error::{Error, Result};
pub use scalar::Real;

pub type CoefficientField64 = coeff::CoefficientField<f64>;
pub type Matrix64 = linalg::Matrix<f64>;
pub type HomogenizedTensor64 = cell::HomogenizedTensor<f64>;
pub type Corrector64 = cell::Corrector<f64>;
pub type Ellipsoid64 = ellipsoid::Ellipsoid<f64>;
pub type DiscreteField64 = pde::DiscreteField<f64>;
pub type InterpolationPlan64 = kernel::InterpolationPlan<f64>;
pub type AuditReport64 = audit::AuditReport<f64>;
pub type BallTriple64 = audit::BallTriple<f64>;
