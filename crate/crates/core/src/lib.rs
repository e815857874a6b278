//! Optimal control of steady, two-dimensional incompressible Navier-Stokes
//! flow driven by finitely many point forces.
//!
//! The control is the vector of amplitudes `u_t` of forces `u_t δ_t` located at
//! the points of a [`DiracSourceSet`], restricted to a box. The crate provides
//! the discretization (graded triangular meshes, Taylor-Hood elements), the
//! nonlinear state solve, linearized and adjoint solves, the reduced gradient
//! and Hessian, a projected-gradient optimizer, and first/second order
//! optimality checks, together with weighted-norm diagnostics built on the
//! distance weight `ρ`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adjoint;
pub mod cli;
mod error;
pub mod fem;
pub mod mesh;
pub mod optimizer;
pub mod quadrature;
pub mod sparse;
pub mod state;
pub mod verification;
pub mod weights;

pub use adjoint::{solve_adjoint, AdjointSolution, Target};
pub use error::{PfError, Result};
pub use fem::{FieldRole, SaddleSystem, TaylorHoodSpace, VelocityPressureField};
pub use mesh::{PolygonDomain, TriMesh};
pub use optimizer::{
    BoxConstraints, ControlProblem, ControlVector, GradientVector, OptimizeReport, SecondOrderReport,
};
pub use state::{StateSolution, StateSolveOptions};
pub use weights::{DiracSourceSet, MuckenhouptWeight};

/// A point in the plane.
pub type Point = [f64; 2];
