use std::sync::Arc;

use super::assembly::stokes_blocks;
use super::field::{FieldRole, VelocityPressureField};
use super::space::TaylorHoodSpace;
use crate::error::{invalid, Result};
use crate::sparse::{CsrMatrix, SparseLu, TripletBuilder};

/// Relative residual demanded from every saddle solve.
pub const LINEAR_TOL: f64 = 1e-10;

/// Stokes blocks on the full velocity space (boundary rows included):
/// `A = ν × vector Laplacian`, `B_{q,j} = -∫ q div φ_j`, velocity mass `M`
/// and the pressure mean row `m_q = ∫ q`.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    space: Arc<TaylorHoodSpace>,
    pub nu: f64,
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub mass: CsrMatrix,
    pub mean_row: Vec<f64>,
}

pub fn assemble_stokes(space: &Arc<TaylorHoodSpace>, nu: f64) -> Result<SaddleSystem> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(invalid(format!("viscosity must be positive, got {nu}")));
    }
    let blocks = stokes_blocks(space, nu);
    Ok(SaddleSystem { space: space.clone(), nu, a: blocks.a, b: blocks.b, mass: blocks.mass, mean_row: blocks.mean_row })
}

impl SaddleSystem {
    pub fn space(&self) -> &Arc<TaylorHoodSpace> {
        &self.space
    }

    /// Factorizes the constrained saddle matrix with velocity block
    /// `A + linearization`.
    pub fn operator(&self, linearization: Option<&CsrMatrix>) -> Result<SaddleOperator> {
        SaddleOperator::new(self, linearization)
    }
}

/// Factorized saddle matrix
///
/// ```text
/// [ (A+L)_ff  B_fᵀ  0 ] [u_f]   [f_f]
/// [ B_f       0     m ] [p  ] = [g  ]
/// [ 0         mᵀ    0 ] [λ  ]   [0  ]
/// ```
///
/// on the interior velocity dofs `f`. The scalar multiplier `λ` pins the
/// pressure mean to zero and keeps the matrix square.
#[derive(Debug)]
pub struct SaddleOperator {
    space: Arc<TaylorHoodSpace>,
    lu: SparseLu,
}

impl SaddleOperator {
    fn new(system: &SaddleSystem, linearization: Option<&CsrMatrix>) -> Result<Self> {
        let space = system.space.clone();
        let nf = space.n_free();
        let np = space.n_p();
        let dim = nf + np + 1;
        let velocity_block = match linearization {
            Some(l) => {
                if l.nrows() != space.n_u() || l.ncols() != space.n_u() {
                    return Err(invalid("linearization block has the wrong shape"));
                }
                system.a.add(l)
            }
            None => system.a.clone(),
        };
        let mut k = TripletBuilder::with_capacity(dim, dim, velocity_block.nnz() + 2 * system.b.nnz() + 2 * np);
        for (i, j, v) in velocity_block.triplets() {
            if let (Some(fi), Some(fj)) = (space.free_index(i), space.free_index(j)) {
                k.push(fi, fj, v);
            }
        }
        for (q, j, v) in system.b.triplets() {
            if let Some(fj) = space.free_index(j) {
                k.push(nf + q, fj, v);
                k.push(fj, nf + q, v);
            }
        }
        for (q, &m) in system.mean_row.iter().enumerate() {
            k.push(nf + q, nf + np, m);
            k.push(nf + np, nf + q, m);
        }
        let lu = SparseLu::factor(k.build())?;
        Ok(SaddleOperator { space, lu })
    }

    pub fn space(&self) -> &Arc<TaylorHoodSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &CsrMatrix {
        self.lu.matrix()
    }

    pub fn dim(&self) -> usize {
        self.lu.dim()
    }

    /// Restricts a full velocity load (and optional pressure load) to the
    /// unknown ordering of the saddle matrix.
    pub fn pack(&self, velocity: &[f64], pressure: Option<&[f64]>) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (i, &d) in self.space.free_dofs().iter().enumerate() {
            out[i] = velocity[d];
        }
        if let Some(p) = pressure {
            let nf = self.space.n_free();
            out[nf..nf + p.len()].copy_from_slice(p);
        }
        out
    }

    pub fn unpack(&self, x: &[f64], role: FieldRole) -> VelocityPressureField {
        let mut field = VelocityPressureField::zeros(self.space.clone(), role);
        for (i, &d) in self.space.free_dofs().iter().enumerate() {
            field.velocity[d] = x[i];
        }
        let nf = self.space.n_free();
        field.pressure.copy_from_slice(&x[nf..nf + self.space.n_p()]);
        field
    }

    /// Solves with a velocity load on the full space (boundary entries are
    /// ignored) and an optional continuity load.
    pub fn solve(&self, velocity_rhs: &[f64], pressure_rhs: Option<&[f64]>, role: FieldRole) -> Result<VelocityPressureField> {
        let x = self.lu.solve(&self.pack(velocity_rhs, pressure_rhs), LINEAR_TOL)?;
        Ok(self.unpack(&x, role))
    }

    /// Solves the transposed system.
    pub fn solve_transpose(&self, velocity_rhs: &[f64], pressure_rhs: Option<&[f64]>, role: FieldRole) -> Result<VelocityPressureField> {
        let x = self.lu.solve_transpose(&self.pack(velocity_rhs, pressure_rhs), LINEAR_TOL)?;
        Ok(self.unpack(&x, role))
    }

    pub fn solve_packed(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.lu.solve(rhs, LINEAR_TOL)
    }

    /// Reciprocal 1-norm condition estimate of the saddle matrix.
    pub fn rcond(&self) -> f64 {
        self.lu.rcond_estimate()
    }

    /// Condition estimate after dividing the momentum rows by `ν` and
    /// multiplying the pressure columns by `ν`, i.e. of the operator in
    /// Reynolds-number form `[L + C/ν, Bᵀ; B, 0]`. Equals [`Self::rcond`]
    /// for `ν = 1`.
    pub fn rcond_viscosity_scaled(&self, nu: f64) -> f64 {
        let nf = self.space.n_free();
        let n = self.dim();
        let row: Vec<f64> = (0..n).map(|i| if i < nf { 1.0 / nu } else { 1.0 }).collect();
        let col: Vec<f64> = (0..n).map(|i| if i < nf { 1.0 } else { nu }).collect();
        self.lu.rcond_estimate_scaled(&row, &col)
    }
}

/// One-shot solve of the saddle problem with velocity block `A + L`.
pub fn solve_saddle(
    system: &SaddleSystem,
    linearization: Option<&CsrMatrix>,
    velocity_rhs: &[f64],
    role: FieldRole,
) -> Result<VelocityPressureField> {
    system.operator(linearization)?.solve(velocity_rhs, None, role)
}
