use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::controls::{project_box, vi_residual, BoxConstraints, ComponentStatus, ControlVector, GradientVector};
use super::hessian::{hessian_at, Hessian};
use super::ControlProblem;
use crate::error::{invalid, PfError, Result};

/// Constraint on one scalar component of a critical direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConeComponent {
    Free,
    Zero,
    NonNegative,
    NonPositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    /// Components with `|Ψ| > tol_active` vanish.
    Strict,
    /// Components with `|Ψ| > τ` vanish.
    Tau,
}

/// Critical cones at a control, component by component.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalCone {
    pub strict: Vec<ConeComponent>,
    pub tau: Vec<ConeComponent>,
}

impl CriticalCone {
    pub fn get(&self, kind: ConeKind) -> &[ConeComponent] {
        match kind {
            ConeKind::Strict => &self.strict,
            ConeKind::Tau => &self.tau,
        }
    }

    /// Whether the cone of the given kind is `{0}`.
    pub fn is_trivial(&self, kind: ConeKind) -> bool {
        self.get(kind).iter().all(|c| *c == ConeComponent::Zero)
    }

    pub fn contains(&self, kind: ConeKind, v: &[f64]) -> bool {
        self.get(kind).iter().zip(v).all(|(c, &x)| match c {
            ConeComponent::Free => true,
            ConeComponent::Zero => x == 0.0,
            ConeComponent::NonNegative => x >= 0.0,
            ConeComponent::NonPositive => x <= 0.0,
        })
    }
}

fn classify(status: ComponentStatus, g: f64, threshold: f64) -> ConeComponent {
    if g.abs() > threshold {
        return ConeComponent::Zero;
    }
    match status {
        ComponentStatus::LowerActive => ConeComponent::NonNegative,
        ComponentStatus::UpperActive => ConeComponent::NonPositive,
        ComponentStatus::Inactive => ConeComponent::Free,
    }
}

/// Sign restrictions at active bounds; components whose gradient exceeds
/// `tol_active` (strict cone) or `tau` (τ-cone) are fixed to zero.
pub fn critical_cone(u: &ControlVector, psi: &GradientVector, bounds: &BoxConstraints, tol_active: f64, tau: f64) -> CriticalCone {
    let uf = u.flat();
    let pf = psi.flat();
    let status: Vec<ComponentStatus> = uf.iter().enumerate().map(|(i, &v)| bounds.status(i, v)).collect();
    CriticalCone {
        strict: status.iter().zip(&pf).map(|(&s, &g)| classify(s, g, tol_active)).collect(),
        tau: status.iter().zip(&pf).map(|(&s, &g)| classify(s, g, tau)).collect(),
    }
}

/// Minimum of `vᵀHv / |v|²` over the nonzero directions of a cone, with
/// a minimizing direction; `+∞` for the cone `{0}`.
///
/// The minimizer lies in the relative interior of some face of the cone
/// (a choice of which sign-restricted components vanish), where it is an
/// eigenvector of the Hessian restricted to that face. Every face and every
/// eigenvector is checked.
pub fn cone_minimum(h: &Hessian, cone: &[ConeComponent]) -> Result<(f64, Option<Vec<f64>>)> {
    let free: Vec<usize> = (0..cone.len()).filter(|&i| cone[i] == ConeComponent::Free).collect();
    let signed: Vec<usize> =
        (0..cone.len()).filter(|&i| matches!(cone[i], ConeComponent::NonNegative | ConeComponent::NonPositive)).collect();
    if signed.len() > 20 {
        return Err(invalid("too many sign-restricted components for exhaustive search"));
    }
    let mut best = f64::INFINITY;
    let mut best_v = None;
    for mask in 0u32..(1u32 << signed.len()) {
        let mut idx = free.clone();
        idx.extend(signed.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &i)| i));
        if idx.is_empty() {
            continue;
        }
        idx.sort_unstable();
        let sub = h.restrict(&idx);
        let evd = sub
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| PfError::Internal(format!("eigen solver failed: {e:?}")))?;
        let vals = evd.S().column_vector();
        let vecs = evd.U();
        for k in 0..idx.len() {
            let lambda = vals[k];
            if lambda >= best {
                continue;
            }
            for sign in [1.0, -1.0] {
                let mut v = vec![0.0; cone.len()];
                for (a, &i) in idx.iter().enumerate() {
                    v[i] = sign * vecs[(a, k)];
                }
                let feasible = idx.iter().all(|&i| match cone[i] {
                    ConeComponent::NonNegative => v[i] >= -1e-12,
                    ConeComponent::NonPositive => v[i] <= 1e-12,
                    _ => true,
                });
                if feasible {
                    for &i in &idx {
                        match cone[i] {
                            ConeComponent::NonNegative => v[i] = v[i].max(0.0),
                            ConeComponent::NonPositive => v[i] = v[i].min(0.0),
                            _ => {}
                        }
                    }
                    best = lambda;
                    best_v = Some(v);
                    break;
                }
            }
        }
    }
    Ok((best, best_v))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SscOptions {
    pub tau: f64,
    pub tol_active: f64,
    /// Smallest cone coercivity accepted as positive.
    pub kappa_min: f64,
    /// Largest projection residual accepted as stationary.
    pub stationarity_tol: f64,
}

impl Default for SscOptions {
    fn default() -> Self {
        SscOptions { tau: 1e-6, tol_active: 1e-8, kappa_min: 1e-12, stationarity_tol: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct SecondOrderReport {
    pub control: ControlVector,
    pub gradient: GradientVector,
    pub hessian: Hessian,
    pub status: Vec<ComponentStatus>,
    /// Active components whose gradient exceeds `tol_active`.
    pub strongly_active: Vec<bool>,
    pub cone: CriticalCone,
    pub tau: f64,
    /// `min vᵀHv/|v|²` over the τ-cone (`+∞` if the cone is `{0}`).
    pub kappa: f64,
    pub kappa_direction: Option<Vec<f64>>,
    pub ssc_holds: bool,
    /// `min vᵀHv/|v|²` over the strict cone.
    pub necessary_min: f64,
    /// `necessary_min ≥ -1e-8 ‖H‖`.
    pub necessary_holds: bool,
}

/// Second-order analysis at a stationary control.
pub fn check_ssc(problem: &ControlProblem, u: &ControlVector, opts: &SscOptions) -> Result<SecondOrderReport> {
    let eval = problem.evaluate(u)?;
    let bounds = problem.bounds();
    let res = vi_residual(u, &eval.gradient, bounds);
    if res > opts.stationarity_tol {
        return Err(invalid(format!("control is not stationary (projection residual {res:e})")));
    }
    let hessian = hessian_at(problem, &eval)?;
    let cone = critical_cone(u, &eval.gradient, bounds, opts.tol_active, opts.tau);
    let (kappa, kappa_direction) = cone_minimum(&hessian, &cone.tau)?;
    let (necessary_min, _) = cone_minimum(&hessian, &cone.strict)?;
    let uf = u.flat();
    let gf = eval.gradient.flat();
    let status: Vec<ComponentStatus> = uf.iter().enumerate().map(|(i, &v)| bounds.status(i, v)).collect();
    let strongly_active =
        status.iter().zip(&gf).map(|(s, g)| *s != ComponentStatus::Inactive && g.abs() > opts.tol_active).collect();
    Ok(SecondOrderReport {
        control: u.clone(),
        gradient: eval.gradient.clone(),
        necessary_holds: necessary_min >= -1e-8 * hessian.frobenius(),
        hessian,
        status,
        strongly_active,
        cone,
        tau: opts.tau,
        ssc_holds: kappa >= opts.kappa_min,
        kappa,
        kappa_direction,
        necessary_min,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    /// Largest `μ ≥ 0` with `j(U_s) ≥ j(U) + (μ/2)|U_s - U|²` on all samples.
    pub mu: f64,
    /// `min 2 (j(U_s) - j(U)) / |U_s - U|²` (negative when growth fails).
    pub min_ratio: f64,
    /// Samples with `j(U_s) < j(U)`.
    pub violations: Vec<usize>,
    pub samples: Vec<ControlVector>,
}

/// Samples `samples` feasible controls in the ball of radius `sigma`
/// around `u` (projected onto the box) and fits the growth constant.
pub fn quadratic_growth_probe(
    problem: &ControlProblem,
    u: &ControlVector,
    sigma: f64,
    samples: usize,
    seed: u64,
) -> Result<GrowthReport> {
    if !(sigma > 0.0) || samples == 0 {
        return Err(invalid("sigma must be positive and at least one sample is required"));
    }
    let j0 = super::reduced_cost(problem, u)?;
    let dim = 2 * u.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_ratio = f64::INFINITY;
    let mut violations = Vec::new();
    let mut taken = Vec::with_capacity(samples);
    while taken.len() < samples {
        let dir: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            continue;
        }
        let radius = sigma * rng.random::<f64>().powf(1.0 / dim as f64);
        let step: Vec<f64> = dir.iter().map(|x| radius * x / n).collect();
        let trial = project_box(&ControlVector::from_flat(&u.flat().iter().zip(&step).map(|(a, b)| a + b).collect::<Vec<_>>())?, problem.bounds());
        let d2 = trial.sub(u).norm_squared();
        if d2 == 0.0 {
            continue;
        }
        let j = super::reduced_cost(problem, &trial)?;
        let ratio = 2.0 * (j - j0) / d2;
        if j < j0 {
            violations.push(taken.len());
        }
        min_ratio = min_ratio.min(ratio);
        taken.push(trial);
    }
    Ok(GrowthReport { mu: min_ratio.max(0.0), min_ratio, violations, samples: taken })
}
