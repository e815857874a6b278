//! Nonlinear state solve with point-force loads, and the linearized and
//! second-order sensitivity solves around a converged state.

use std::sync::Arc;

use crate::error::{invalid, PfError, Result};
use crate::fem::{
    assemble_convection, assemble_convective_load, assemble_dirac_load, FieldRole, SaddleOperator, SaddleSystem,
    VelocityPressureField,
};
use crate::sparse::norm2;
use crate::weights::DiracSourceSet;

/// Default threshold above which the regularity indicator is reported as
/// regular.
pub const REGULARITY_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSolveOptions {
    /// Fixed-point (Oseen) iterations before Newton.
    pub picard_iters: usize,
    /// Relative residual at which Newton stops.
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    /// Number of load increments tried when Newton fails on the full load.
    pub continuation_steps: usize,
}

impl Default for StateSolveOptions {
    fn default() -> Self {
        StateSolveOptions { picard_iters: 3, newton_tol: 1e-10, newton_max_iters: 30, continuation_steps: 2 }
    }
}

impl StateSolveOptions {
    fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) {
            return Err(invalid(format!("newton_tol must be positive, got {}", self.newton_tol)));
        }
        Ok(())
    }
}

/// Discrete state together with the factorized Jacobian at that state.
#[derive(Debug, Clone)]
pub struct StateSolution {
    pub field: VelocityPressureField,
    pub converged: bool,
    /// Relative residual after every Picard/Newton iteration.
    pub residual_history: Vec<f64>,
    /// Reciprocal condition estimate of the Jacobian saddle matrix in
    /// Reynolds-number scaling.
    pub regularity_indicator: f64,
    system: Arc<SaddleSystem>,
    jacobian: Arc<SaddleOperator>,
    load: Vec<f64>,
}

impl StateSolution {
    pub fn system(&self) -> &Arc<SaddleSystem> {
        &self.system
    }

    /// Jacobian `A + C₁(y) + C₂(y)` with the pressure constraints.
    pub fn jacobian(&self) -> &Arc<SaddleOperator> {
        &self.jacobian
    }

    /// The velocity load the state was solved for.
    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }

    /// Errors with `NonConvergence` unless the solve converged.
    pub fn require_converged(&self) -> Result<&Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(PfError::NonConvergence { iterations: self.residual_history.len(), residual: self.final_residual() })
        }
    }

    pub fn is_regular(&self, threshold: f64) -> bool {
        self.regularity_indicator > threshold
    }
}

/// Solves the state equation with point forces `amplitudes[i]` at
/// `sources.points()[i]`.
pub fn solve_state(
    system: &Arc<SaddleSystem>,
    sources: &DiracSourceSet,
    amplitudes: &[[f64; 2]],
    opts: &StateSolveOptions,
) -> Result<StateSolution> {
    if amplitudes.len() != sources.len() {
        return Err(invalid(format!("expected {} amplitudes, got {}", sources.len(), amplitudes.len())));
    }
    let load = assemble_dirac_load(system.space(), sources.points(), amplitudes)?;
    solve_state_with_load(system, load, opts)
}

/// Solves the state equation for an arbitrary velocity load.
pub fn solve_state_with_load(system: &Arc<SaddleSystem>, load: Vec<f64>, opts: &StateSolveOptions) -> Result<StateSolution> {
    opts.validate()?;
    let space = system.space().clone();
    if load.len() != space.n_u() {
        return Err(invalid("load length does not match the velocity space"));
    }
    let stokes = system.operator(None)?;
    let full = stokes.pack(&load, None);
    let load_norm = norm2(&full);
    if load_norm == 0.0 {
        let field = VelocityPressureField::zeros(space, FieldRole::State);
        let regularity_indicator = stokes.rcond_viscosity_scaled(system.nu);
        return Ok(StateSolution {
            field,
            converged: true,
            residual_history: vec![0.0],
            regularity_indicator,
            system: system.clone(),
            jacobian: Arc::new(stokes),
            load,
        });
    }

    let mut history = Vec::new();
    let solver = Nonlinear { system, stokes: &stokes };
    let mut x = vec![0.0; stokes.dim()];
    let mut converged = solver.run(&mut x, &full, 1.0, opts, opts.picard_iters, &mut history)?;
    if !converged && opts.continuation_steps > 1 {
        x.iter_mut().for_each(|v| *v = 0.0);
        let steps = opts.continuation_steps;
        for k in 1..=steps {
            let s = k as f64 / steps as f64;
            let picard = if k == 1 { opts.picard_iters } else { 0 };
            converged = solver.run(&mut x, &full, s, opts, picard, &mut history)?;
            if !converged {
                break;
            }
        }
    }
    let mut field = stokes.unpack(&x, FieldRole::State);
    field.role = FieldRole::State;
    let jacobian = jacobian_operator(system, &field)?;
    let regularity_indicator = jacobian.rcond_viscosity_scaled(system.nu);
    Ok(StateSolution {
        field,
        converged,
        residual_history: history,
        regularity_indicator,
        system: system.clone(),
        jacobian: Arc::new(jacobian),
        load,
    })
}

fn jacobian_operator(system: &SaddleSystem, y: &VelocityPressureField) -> Result<SaddleOperator> {
    let (c1, c2) = assemble_convection(system.space(), y)?;
    system.operator(Some(&c1.add(&c2)))
}

struct Nonlinear<'a> {
    system: &'a SaddleSystem,
    stokes: &'a SaddleOperator,
}

impl Nonlinear<'_> {
    /// Packed residual `K x + N(y) - s F` of the constrained system.
    fn residual(&self, x: &[f64], load: &[f64], scale: f64) -> Result<(Vec<f64>, VelocityPressureField)> {
        let y = self.stokes.unpack(x, FieldRole::State);
        let (c1, _) = assemble_convection(self.system.space(), &y)?;
        let conv = self.stokes.pack(&c1.matvec(&y.velocity), None);
        let kx = self.stokes.matrix().matvec(x);
        let r = kx.iter().zip(&conv).zip(load).map(|((k, c), f)| k + c - scale * f).collect();
        Ok((r, y))
    }

    /// Picard then damped Newton on the load `scale × load`, starting from
    /// `x`. Returns whether the relative residual reached the tolerance.
    fn run(
        &self,
        x: &mut Vec<f64>,
        load: &[f64],
        scale: f64,
        opts: &StateSolveOptions,
        picard: usize,
        history: &mut Vec<f64>,
    ) -> Result<bool> {
        let reference = scale * norm2(load);
        let scaled: Vec<f64> = load.iter().map(|f| scale * f).collect();
        for _ in 0..picard {
            let y = self.stokes.unpack(x, FieldRole::State);
            let (c1, _) = assemble_convection(self.system.space(), &y)?;
            *x = self.system.operator(Some(&c1))?.solve_packed(&scaled)?;
            let (r, _) = self.residual(x, load, scale)?;
            history.push(norm2(&r) / reference);
        }
        let (mut r, mut y) = self.residual(x, load, scale)?;
        let mut rel = norm2(&r) / reference;
        for _ in 0..opts.newton_max_iters {
            if rel <= opts.newton_tol {
                return Ok(true);
            }
            if !rel.is_finite() {
                return Ok(false);
            }
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let delta = jacobian_operator(self.system, &y)?.solve_packed(&rhs)?;
            let mut step = 1.0;
            loop {
                let trial: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + step * d).collect();
                let (rt, yt) = self.residual(&trial, load, scale)?;
                let rel_t = norm2(&rt) / reference;
                if rel_t < rel || step < 1.0 / 32.0 {
                    *x = trial;
                    r = rt;
                    y = yt;
                    rel = rel_t;
                    break;
                }
                step *= 0.5;
            }
            history.push(rel);
        }
        Ok(rel <= opts.newton_tol)
    }
}

/// Sensitivity `(θ, ξ)`: solves the Jacobian system with a velocity load.
pub fn solve_linearized(state: &StateSolution, load: &[f64]) -> Result<VelocityPressureField> {
    state.require_converged()?;
    if load.len() != state.field.space().n_u() {
        return Err(invalid("load length does not match the velocity space"));
    }
    state.jacobian.solve(load, None, FieldRole::Sensitivity)
}

/// Sensitivity of the state to a change `directions` of the point forces.
pub fn solve_linearized_dirac(state: &StateSolution, sources: &DiracSourceSet, directions: &[[f64; 2]]) -> Result<VelocityPressureField> {
    let load = assemble_dirac_load(state.field.space(), sources.points(), directions)?;
    solve_linearized(state, &load)
}

/// Second-order sensitivity `(ψ, γ)` for the pair of directions with
/// sensitivities `theta1`, `theta2`: the Jacobian system with load
/// `-[(θ₁·∇)θ₂ + (θ₂·∇)θ₁]`.
pub fn solve_second_sensitivity(
    state: &StateSolution,
    theta1: &VelocityPressureField,
    theta2: &VelocityPressureField,
) -> Result<VelocityPressureField> {
    state.require_converged()?;
    if !theta1.same_space(&state.field) || !theta2.same_space(&state.field) {
        return Err(invalid("sensitivities live on a different space than the state"));
    }
    let a = assemble_convective_load(theta1, theta2)?;
    let b = assemble_convective_load(theta2, theta1)?;
    let rhs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| -(x + y)).collect();
    let mut psi = state.jacobian.solve(&rhs, None, FieldRole::SecondSensitivity)?;
    psi.role = FieldRole::SecondSensitivity;
    Ok(psi)
}

/// Reciprocal condition estimate of the factorized Jacobian saddle
/// matrix at the state, with momentum rows divided by `ν` and pressure
/// columns multiplied by `ν` so that viscosity enters as a Reynolds number. A heuristic signal, not a proof of regularity.
pub fn regularity_indicator(state: &StateSolution) -> f64 {
    state.regularity_indicator
}
