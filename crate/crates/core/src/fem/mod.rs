//! Taylor-Hood (P2 velocity / P1 pressure) discretization: spaces, fields,
//! assembly of the Stokes, convection and load terms, and the constrained
//! saddle-point solve.

mod assembly;
mod field;
mod saddle;
mod space;

pub use assembly::{
    assemble_convection, assemble_convective_load, assemble_dirac_load, assemble_field_load, assemble_function_load, assemble_tensor_load,
    CONVECTION_DEGREE, STOKES_DEGREE,
};
pub use field::{FieldRole, VelocityPressureField};
pub use saddle::{assemble_stokes, solve_saddle, SaddleOperator, SaddleSystem, LINEAR_TOL};
pub use space::{p2_eval, p2_eval_bary, ElementGeometry, P2Eval, TaylorHoodSpace};

#[cfg(test)]
mod tests;
