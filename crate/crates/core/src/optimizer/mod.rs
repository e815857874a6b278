//! Reduced cost, adjoint gradient, projected-gradient descent and the
//! first- and second-order optimality diagnostics for point-force controls.

mod cone;
mod controls;
mod hessian;

use std::sync::Arc;

pub use cone::{
    check_ssc, critical_cone, quadratic_growth_probe, ConeComponent, ConeKind, CriticalCone, GrowthReport,
    SecondOrderReport, SscOptions,
};
pub use controls::{
    kkt_sign_report, project_box, vi_residual, BoxConstraints, ComponentStatus, ControlVector, GradientVector,
    KktReport,
};
pub use hessian::{assemble_reduced_hessian, hessian_quadratic_form, hessian_tensor_form, Hessian};

use crate::adjoint::{solve_adjoint, AdjointSolution, Target};
use crate::error::{invalid, PfError, Result};
use crate::fem::SaddleSystem;
use crate::state::{solve_state, StateSolution, StateSolveOptions};
use crate::weights::DiracSourceSet;

/// Everything the reduced functional depends on besides the control.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    system: Arc<SaddleSystem>,
    sources: DiracSourceSet,
    target: Target,
    eta: f64,
    bounds: BoxConstraints,
    state_options: StateSolveOptions,
}

impl ControlProblem {
    pub fn new(
        system: Arc<SaddleSystem>,
        sources: DiracSourceSet,
        target: Target,
        eta: f64,
        bounds: BoxConstraints,
    ) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(invalid(format!("eta must be positive, got {eta}")));
        }
        if bounds.len() != sources.len() {
            return Err(invalid("one box per source point is required"));
        }
        Ok(ControlProblem { system, sources, target, eta, bounds, state_options: StateSolveOptions::default() })
    }

    pub fn with_state_options(mut self, opts: StateSolveOptions) -> Self {
        self.state_options = opts;
        self
    }

    pub fn with_target(mut self, target: Target) -> Self {
        self.target = target;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(invalid(format!("eta must be positive, got {eta}")));
        }
        self.eta = eta;
        Ok(self)
    }

    pub fn system(&self) -> &Arc<SaddleSystem> {
        &self.system
    }

    pub fn sources(&self) -> &DiracSourceSet {
        &self.sources
    }

    pub fn target(&self) -> &Target {
        &self.target
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn bounds(&self) -> &BoxConstraints {
        &self.bounds
    }

    pub fn state_options(&self) -> &StateSolveOptions {
        &self.state_options
    }

    fn check(&self, u: &ControlVector) -> Result<()> {
        if u.len() != self.sources.len() {
            return Err(invalid(format!("expected {} control pairs, got {}", self.sources.len(), u.len())));
        }
        Ok(())
    }

    /// Converged state for `u`; nonconvergence is an error.
    pub fn state(&self, u: &ControlVector) -> Result<StateSolution> {
        self.check(u)?;
        let s = solve_state(&self.system, &self.sources, u.values(), &self.state_options)?;
        s.require_converged()?;
        Ok(s)
    }

    /// State, adjoint, cost and gradient at `u`.
    pub fn evaluate(&self, u: &ControlVector) -> Result<Evaluation> {
        let state = self.state(u)?;
        let adjoint = solve_adjoint(&state, &self.target, &self.sources)?;
        let cost = adjoint.tracking_cost + 0.5 * self.eta * u.norm_squared();
        let gradient = GradientVector::new(
            adjoint.point_values.iter().zip(u.values()).map(|(z, u)| [z[0] + self.eta * u[0], z[1] + self.eta * u[1]]).collect(),
        );
        Ok(Evaluation { control: u.clone(), state, adjoint, cost, gradient })
    }
}

/// Reduced functional data at one control.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub control: ControlVector,
    pub state: StateSolution,
    pub adjoint: AdjointSolution,
    pub cost: f64,
    pub gradient: GradientVector,
}

/// `j(U) = ½‖y(U) - y_Ω‖² + (η/2) Σ |u_t|²`.
pub fn reduced_cost(problem: &ControlProblem, u: &ControlVector) -> Result<f64> {
    let state = problem.state(u)?;
    let tracking = crate::adjoint::tracking_cost(&state.field, &problem.target)?;
    Ok(tracking + 0.5 * problem.eta * u.norm_squared())
}

/// `Ψ_t = z(t) + η u_t`.
pub fn reduced_gradient(problem: &ControlProblem, u: &ControlVector) -> Result<GradientVector> {
    Ok(problem.evaluate(u)?.gradient)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    /// Stop once the projection residual is at most this.
    pub tol: f64,
    pub max_iters: usize,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
    /// Barzilai-Borwein trial steps (otherwise every iteration starts at 1).
    pub bb_steps: bool,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions { tol: 1e-8, max_iters: 200, armijo_c: 1e-4, backtrack_factor: 0.5, max_backtracks: 30, bb_steps: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub control: ControlVector,
    pub cost: f64,
    pub vi_residual: f64,
    /// Step length that produced this iterate (0 for the start).
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeReport {
    pub iterates: Vec<IterateRecord>,
    pub final_control: ControlVector,
    pub final_gradient: GradientVector,
    pub converged: bool,
    pub iterations: usize,
    pub backtracks: usize,
    /// Trial points at which the state solve failed.
    pub rejected_trials: usize,
    pub message: String,
}

impl OptimizeReport {
    pub fn final_cost(&self) -> f64 {
        self.iterates.last().map(|r| r.cost).unwrap_or(f64::NAN)
    }

    pub fn final_vi_residual(&self) -> f64 {
        self.iterates.last().map(|r| r.vi_residual).unwrap_or(f64::NAN)
    }
}

/// Projected gradient `U⁺ = P(U - sΨ)` with Armijo backtracking along the
/// projection arc. The trial step is the Barzilai-Borwein length when
/// enabled (capped below by the last accepted step's scale), else 1.
pub fn projected_gradient(problem: &ControlProblem, u0: &ControlVector, opts: &OptimizeOptions) -> Result<OptimizeReport> {
    let bounds = problem.bounds();
    if !bounds.contains(u0) {
        return Err(invalid("initial control violates the box"));
    }
    let mut current = problem.evaluate(u0)?;
    let mut res = vi_residual(&current.control, &current.gradient, bounds);
    let mut iterates = vec![IterateRecord { control: current.control.clone(), cost: current.cost, vi_residual: res, step: 0.0 }];
    let mut backtracks = 0;
    let mut rejected = 0;
    let mut trial_step = 1.0;
    let mut iterations = 0;
    let mut message = String::from("budget exhausted");
    let mut converged = res <= opts.tol;
    if converged {
        message = "start is stationary".into();
    }
    while !converged && iterations < opts.max_iters {
        let mut step = trial_step;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let candidate = project_box(&current.control.axpy(-step, current.gradient.values()), bounds);
            let d = candidate.sub(&current.control);
            let decrease = current.gradient.dot(&d);
            if d.norm_squared() == 0.0 {
                break;
            }
            match problem.evaluate(&candidate) {
                Ok(eval) if eval.cost <= current.cost + opts.armijo_c * decrease => {
                    accepted = Some(eval);
                    break;
                }
                Ok(_) => {}
                Err(PfError::NonConvergence { .. }) | Err(PfError::SingularSystem { .. }) => rejected += 1,
                Err(e) => return Err(e),
            }
            backtracks += 1;
            step *= opts.backtrack_factor;
        }
        let Some(next) = accepted else {
            message = "line search failed".into();
            break;
        };
        iterations += 1;
        if opts.bb_steps {
            let s = next.control.sub(&current.control);
            let y = next.gradient.sub(&current.gradient);
            let sy = s.dot(&y);
            trial_step = if sy > 0.0 { s.norm_squared() / sy } else { (2.0 * step).min(1e12) };
        }
        current = next;
        res = vi_residual(&current.control, &current.gradient, bounds);
        iterates.push(IterateRecord { control: current.control.clone(), cost: current.cost, vi_residual: res, step });
        if res <= opts.tol {
            converged = true;
            message = "projection residual below tolerance".into();
        }
    }
    Ok(OptimizeReport {
        final_control: current.control.clone(),
        final_gradient: current.gradient.clone(),
        iterates,
        converged,
        iterations,
        backtracks,
        rejected_trials: rejected,
        message,
    })
}

#[cfg(test)]
mod tests;
