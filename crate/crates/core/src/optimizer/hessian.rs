use faer::Mat;

use super::{ControlProblem, ControlVector, Evaluation};
use crate::adjoint::TRACKING_DEGREE;
use crate::error::{invalid, Result};
use crate::fem::{assemble_convective_load, assemble_tensor_load, VelocityPressureField};
use crate::quadrature::TriangleRule;
use crate::sparse::dot;
use crate::state::solve_linearized_dirac;

/// Dense symmetric reduced Hessian over the flat control components
/// `[u_1x, u_1y, u_2x, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hessian {
    dim: usize,
    entries: Vec<f64>,
}

impl Hessian {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(invalid("Hessian rows must form a square matrix"));
        }
        Ok(Hessian { dim, entries: rows.iter().flatten().copied().collect() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim.max(1)).map(|r| r.to_vec()).collect()
    }

    /// `vᵀHv`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        (0..self.dim).map(|i| v[i] * (0..self.dim).map(|j| self.get(i, j) * v[j]).sum::<f64>()).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `‖H - Hᵀ‖_F`.
    pub fn asymmetry(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += (self.get(i, j) - self.get(j, i)).powi(2);
            }
        }
        s.sqrt()
    }

    /// Principal submatrix on `idx`.
    pub(crate) fn restrict(&self, idx: &[usize]) -> Mat<f64> {
        Mat::from_fn(idx.len(), idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    /// Eigenvalues in nondecreasing order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let all: Vec<usize> = (0..self.dim).collect();
        self.restrict(&all)
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|e| crate::PfError::Internal(format!("eigenvalue solver failed: {e:?}")))
    }
}

/// `∫ a · b` with the tracking rule.
fn l2_inner(a: &VelocityPressureField, b: &VelocityPressureField) -> f64 {
    let space = a.space();
    let rule = TriangleRule::with_degree(TRACKING_DEGREE);
    let mut total = 0.0;
    for k in 0..space.n_elements() {
        let mut local = 0.0;
        for (r, w) in rule.points.iter().zip(&rule.weights) {
            let (va, _) = space.velocity_in_element(&a.velocity, k, *r);
            let (vb, _) = space.velocity_in_element(&b.velocity, k, *r);
            local += w * (va[0] * vb[0] + va[1] * vb[1]);
        }
        total += 2.0 * space.geometry(k).area * local;
    }
    total
}

/// `∫ (a·∇)b · z`.
fn advection_against(a: &VelocityPressureField, b: &VelocityPressureField, z: &VelocityPressureField) -> Result<f64> {
    Ok(dot(&assemble_convective_load(a, b)?, &z.velocity))
}

fn sensitivity(problem: &ControlProblem, eval: &Evaluation, v: &ControlVector) -> Result<VelocityPressureField> {
    if v.len() != problem.sources().len() {
        return Err(invalid("direction has the wrong number of control pairs"));
    }
    solve_linearized_dirac(&eval.state, problem.sources(), v.values())
}

/// `j''(U)V² = ∫|θ|² - 2∫(θ·∇)θ · z + η|V|²` at a precomputed evaluation.
pub(crate) fn quadratic_form_at(problem: &ControlProblem, eval: &Evaluation, v: &ControlVector) -> Result<f64> {
    let theta = sensitivity(problem, eval, v)?;
    let z = &eval.adjoint.field;
    Ok(l2_inner(&theta, &theta) - 2.0 * advection_against(&theta, &theta, z)? + problem.eta() * v.norm_squared())
}

/// Second derivative of the reduced cost along `v`.
pub fn hessian_quadratic_form(problem: &ControlProblem, u: &ControlVector, v: &ControlVector) -> Result<f64> {
    let eval = problem.evaluate(u)?;
    quadratic_form_at(problem, &eval, v)
}

/// The same quantity with the convective term in divergence form,
/// `∫|θ|² + 2∫(θ⊗θ):∇z + η|V|²`. The two agree up to `∫ div θ (θ·z)`,
/// which is nonzero for discretely divergence-free `θ`.
pub fn hessian_tensor_form(problem: &ControlProblem, u: &ControlVector, v: &ControlVector) -> Result<f64> {
    let eval = problem.evaluate(u)?;
    let theta = sensitivity(problem, &eval, v)?;
    let tensor = dot(&assemble_tensor_load(&theta, &theta)?, &eval.adjoint.field.velocity);
    Ok(l2_inner(&theta, &theta) + 2.0 * tensor + problem.eta() * v.norm_squared())
}

pub(crate) fn hessian_at(problem: &ControlProblem, eval: &Evaluation) -> Result<Hessian> {
    let n = 2 * problem.sources().len();
    let mut thetas = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        thetas.push(sensitivity(problem, eval, &ControlVector::from_flat(&e)?)?);
    }
    let z = &eval.adjoint.field;
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let conv = advection_against(&thetas[i], &thetas[j], z)? + advection_against(&thetas[j], &thetas[i], z)?;
            let mut h = l2_inner(&thetas[i], &thetas[j]) - conv;
            if i == j {
                h += problem.eta();
            }
            rows[i][j] = h;
            rows[j][i] = h;
        }
    }
    Hessian::from_rows(&rows)
}

/// `H_ij = ∫θ_i·θ_j - ∫[(θ_i·∇)θ_j + (θ_j·∇)θ_i]·z + η δ_ij` over the
/// canonical directions; all columns share the state factorization.
pub fn assemble_reduced_hessian(problem: &ControlProblem, u: &ControlVector) -> Result<Hessian> {
    let eval = problem.evaluate(u)?;
    hessian_at(problem, &eval)
}
