use std::sync::Arc;

use super::*;
use crate::fem::{assemble_stokes, TaylorHoodSpace};
use crate::mesh::{build_unit_square_mesh, grade_toward_points, PolygonDomain};

fn problem(points: &[[f64; 2]], nu: f64, eta: f64, target: Target, lo: f64, hi: f64) -> ControlProblem {
    let base = build_unit_square_mesh(8).unwrap();
    let mesh = grade_toward_points(&base, points, 2, 0.5).unwrap();
    let space = TaylorHoodSpace::new(Arc::new(mesh));
    let sys = Arc::new(assemble_stokes(&space, nu).unwrap());
    let sources = DiracSourceSet::new(points.to_vec(), &PolygonDomain::unit_square()).unwrap();
    let bounds = BoxConstraints::uniform(points.len(), lo, hi).unwrap();
    ControlProblem::new(sys, sources, target, eta, bounds).unwrap()
}

fn swirl() -> Target {
    Target::analytic(|x| {
        let s = (x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])) * 16.0;
        [s * (x[1] - 0.5), -s * (x[0] - 0.5)]
    })
}

#[test]
fn problem_validation() {
    let p = problem(&[[0.5, 0.5]], 1.0, 1.0, Target::zero(), -1.0, 1.0);
    assert!(p.clone().with_eta(0.0).is_err());
    assert!(reduced_cost(&p, &ControlVector::zeros(2)).is_err());
}

#[test]
fn cost_examples() {
    let p = problem(&[[0.5, 0.5]], 1.0, 1.0, Target::zero(), -1.0, 1.0);
    assert_eq!(reduced_cost(&p, &ControlVector::zeros(1)).unwrap(), 0.0);
    let p = p.with_target(Target::analytic(|_| [1.0, 0.0]));
    assert!((reduced_cost(&p, &ControlVector::zeros(1)).unwrap() - 0.5).abs() < 1e-14);
    let u = ControlVector::new(vec![[0.4, -0.3]]);
    let y = p.state(&u).unwrap().field;
    let p = p.with_target(Target::Discrete(y)).with_eta(0.3).unwrap();
    assert_eq!(reduced_cost(&p, &u).unwrap(), 0.5 * 0.3 * 0.25);
}

#[test]
fn gradient_with_exact_target_is_regularization() {
    let u = ControlVector::new(vec![[0.7, -0.2], [0.1, 0.5]]);
    let p = problem(&[[0.3, 0.4], [0.7, 0.6]], 0.5, 1.0, Target::zero(), -1.0, 1.0);
    let y = p.state(&u).unwrap().field;
    let p = p.with_target(Target::Discrete(y));
    assert_eq!(reduced_gradient(&p, &u).unwrap().values(), u.values());
}

#[test]
fn gradient_is_affine_in_eta() {
    let u = ControlVector::new(vec![[0.7, -0.2]]);
    let p = problem(&[[0.5, 0.5]], 0.5, 0.1, swirl(), -1.0, 1.0);
    let g1 = reduced_gradient(&p, &u).unwrap();
    let g2 = reduced_gradient(&p.clone().with_eta(0.6).unwrap(), &u).unwrap();
    let diff = g2.sub(&g1);
    for (d, u) in diff.values().iter().zip(u.values()) {
        for c in 0..2 {
            assert!((d[c] - 0.5 * u[c]).abs() <= 1e-15);
        }
    }
}

#[test]
fn gradient_matches_central_differences() {
    let p = problem(&[[0.5, 0.5]], 0.1, 1e-3, swirl(), -5.0, 5.0);
    let u = ControlVector::new(vec![[0.8, -0.6]]);
    let g = reduced_gradient(&p, &u).unwrap().flat();
    let h = 1e-4;
    for i in 0..2 {
        let mut e = vec![0.0; 2];
        e[i] = h;
        let jp = reduced_cost(&p, &u.axpy(1.0, ControlVector::from_flat(&e).unwrap().values())).unwrap();
        let jm = reduced_cost(&p, &u.axpy(-1.0, ControlVector::from_flat(&e).unwrap().values())).unwrap();
        let fd = (jp - jm) / (2.0 * h);
        assert!((fd - g[i]).abs() <= 1e-4 * g[i].abs(), "{i}: {fd} vs {}", g[i]);
    }
}

#[test]
fn hessian_forms_agree() {
    let p = problem(&[[0.3, 0.4], [0.7, 0.6]], 0.2, 1e-2, swirl(), -5.0, 5.0);
    let u = ControlVector::new(vec![[1.0, -0.5], [-0.3, 0.8]]);
    let h = assemble_reduced_hessian(&p, &u).unwrap();
    assert_eq!(h.asymmetry(), 0.0);
    let v = ControlVector::new(vec![[0.3, -0.2], [0.9, 0.4]]);
    let form = hessian_quadratic_form(&p, &u, &v).unwrap();
    let mat = h.quadratic_form(&v.flat());
    assert!((form - mat).abs() <= 1e-10 * form.abs(), "{form} vs {mat}");
    assert_eq!(hessian_quadratic_form(&p, &u, &ControlVector::zeros(2)).unwrap(), 0.0);

    // Second central difference of the reduced cost along v.
    let eps = 1e-3;
    let j0 = reduced_cost(&p, &u).unwrap();
    let jp = reduced_cost(&p, &u.axpy(eps, v.values())).unwrap();
    let jm = reduced_cost(&p, &u.axpy(-eps, v.values())).unwrap();
    let fd = (jp - 2.0 * j0 + jm) / (eps * eps);
    assert!((fd - form).abs() <= 1e-3 * form.abs(), "{fd} vs {form}");

    // The divergence form differs only through the discrete divergence.
    let tensor = hessian_tensor_form(&p, &u, &v).unwrap();
    assert!((tensor - form).abs() <= 0.05 * form.abs(), "{tensor} vs {form}");
}

#[test]
fn hessian_with_zero_adjoint_is_gram_plus_eta() {
    let u = ControlVector::new(vec![[0.5, 0.5]]);
    let p = problem(&[[0.5, 0.5]], 0.5, 0.01, Target::zero(), -1.0, 1.0);
    let y = p.state(&u).unwrap().field;
    let p = p.with_target(Target::Discrete(y));
    let h = assemble_reduced_hessian(&p, &u).unwrap();
    let ev = h.eigenvalues().unwrap();
    assert!(ev[0] >= 0.01 * (1.0 - 1e-10), "{ev:?}");
    let v = ControlVector::new(vec![[1.0, -2.0]]);
    assert!(hessian_quadratic_form(&p, &u, &v).unwrap() > 0.01 * v.norm_squared());
}

#[test]
fn cone_examples() {
    let b = BoxConstraints::uniform(1, -1.0, 1.0).unwrap();
    let at_bounds = ControlVector::new(vec![[-1.0, 1.0]]);
    let c = critical_cone(&at_bounds, &GradientVector::new(vec![[0.5, -0.5]]), &b, 1e-8, 1e-6);
    assert!(c.is_trivial(ConeKind::Tau) && c.is_trivial(ConeKind::Strict));
    let inner = ControlVector::new(vec![[0.1, 0.2]]);
    let c = critical_cone(&inner, &GradientVector::new(vec![[0.0, 0.0]]), &b, 1e-8, 1e-6);
    assert_eq!(c.tau, vec![ConeComponent::Free; 2]);
    let mixed = ControlVector::new(vec![[-1.0, 0.2]]);
    let c = critical_cone(&mixed, &GradientVector::new(vec![[0.1, 0.0]]), &b, 1e-8, 1e-6);
    assert_eq!(c.tau, vec![ConeComponent::Zero, ConeComponent::Free]);
    // Weakly active: gradient between tol_active and τ.
    let c = critical_cone(&mixed, &GradientVector::new(vec![[1e-7, 0.0]]), &b, 1e-8, 1e-6);
    assert_eq!(c.strict[0], ConeComponent::Zero);
    assert_eq!(c.tau[0], ConeComponent::NonNegative);
}

#[test]
fn cone_minimum_against_sampling() {
    let h = Hessian::from_rows(&[vec![2.0, 1.5, 0.0], vec![1.5, 2.0, 0.3], vec![0.0, 0.3, 1.0]]).unwrap();
    let cone = [ConeComponent::NonNegative, ConeComponent::NonNegative, ConeComponent::Free];
    let (kappa, dir) = cone::cone_minimum(&h, &cone).unwrap();
    let dir = dir.unwrap();
    assert!(dir[0] >= 0.0 && dir[1] >= 0.0);
    let n2: f64 = dir.iter().map(|x| x * x).sum();
    assert!((h.quadratic_form(&dir) / n2 - kappa).abs() < 1e-12);
    // Exhaustive grid over the sign-restricted orthant.
    let mut best = f64::INFINITY;
    for a in 0..=60 {
        for b in 0..=60 {
            for c in -60..=60 {
                let v = [a as f64, b as f64, c as f64];
                let n: f64 = v.iter().map(|x| x * x).sum();
                if n > 0.0 {
                    best = best.min(h.quadratic_form(&v) / n);
                }
            }
        }
    }
    assert!(kappa <= best + 1e-12 && kappa >= best - 1e-3, "{kappa} vs {best}");
    let ev = h.eigenvalues().unwrap();
    let (free_min, _) = cone::cone_minimum(&h, &[ConeComponent::Free; 3]).unwrap();
    assert!((free_min - ev[0]).abs() < 1e-12);
    let (trivial, d) = cone::cone_minimum(&h, &[ConeComponent::Zero; 3]).unwrap();
    assert_eq!(trivial, f64::INFINITY);
    assert!(d.is_none());
}

#[test]
fn projected_gradient_recovers_synthetic_target() {
    let p = problem(&[[0.5, 0.5]], 0.1, 1e-6, Target::zero(), -5.0, 5.0);
    let star = ControlVector::new(vec![[1.2, -0.7]]);
    let y = p.state(&star).unwrap().field;
    let p = p.with_target(Target::Discrete(y));
    let report = projected_gradient(&p, &ControlVector::zeros(1), &OptimizeOptions::default()).unwrap();
    assert!(report.converged, "{}: {:?}", report.message, report.iterates.last());
    assert!(report.final_vi_residual() <= 1e-8);
    let j_star = reduced_cost(&p, &star).unwrap();
    assert!(report.final_cost() <= j_star + 1e-10);
    for w in report.iterates.windows(2) {
        assert!(w[1].cost <= w[0].cost);
    }
    let kkt = kkt_sign_report(&report.final_control, &report.final_gradient, p.bounds(), 1e-8);
    assert!(kkt.compliant());

    // Restarting at the result stops immediately.
    let again = projected_gradient(&p, &report.final_control, &OptimizeOptions::default()).unwrap();
    assert_eq!(again.iterations, 0);
    assert!(again.converged);
}

#[test]
fn projected_gradient_stops_on_active_bounds() {
    let p = problem(&[[0.5, 0.5]], 0.1, 1e-4, Target::analytic(|x| [10.0 * x[1] * (1.0 - x[1]), 0.0]), -0.5, 0.5);
    let report = projected_gradient(&p, &ControlVector::zeros(1), &OptimizeOptions::default()).unwrap();
    assert!(report.converged, "{}", report.message);
    let kkt = kkt_sign_report(&report.final_control, &report.final_gradient, p.bounds(), 1e-8);
    assert!(kkt.compliant());
    assert_eq!(kkt.status[0], ComponentStatus::UpperActive);
    let ssc = check_ssc(&p, &report.final_control, &SscOptions::default()).unwrap();
    assert!(ssc.necessary_holds);
    assert!(ssc.ssc_holds);
    assert!(ssc.strongly_active[0]);
    assert_eq!(ssc.cone.tau[0], ConeComponent::Zero);
}

#[test]
fn ssc_examples() {
    // Interior stationary point with zero adjoint: κ is the smallest
    // eigenvalue of the Hessian.
    let u = ControlVector::new(vec![[0.5, -0.5]]);
    let p = problem(&[[0.5, 0.5]], 0.5, 1.0, Target::zero(), -2.0, 2.0);
    let y = p.state(&u).unwrap().field;
    let p = p.with_target(Target::Discrete(y)).with_eta(1e-12).unwrap();
    let r = check_ssc(&p, &u, &SscOptions::default()).unwrap();
    let ev = r.hessian.eigenvalues().unwrap();
    assert!((r.kappa - ev[0]).abs() <= 1e-12 * ev[0].abs().max(1e-30) + 1e-15, "{} vs {ev:?}", r.kappa);
    assert!(r.ssc_holds);

    // Non-stationary input.
    let p2 = problem(&[[0.5, 0.5]], 0.5, 1.0, swirl(), -2.0, 2.0);
    assert!(matches!(check_ssc(&p2, &ControlVector::new(vec![[0.3, 0.3]]), &SscOptions::default()), Err(PfError::InvalidArgument(_))));

    // Every component pinned by a large gradient: vacuous.
    let p3 = problem(&[[0.5, 0.5]], 0.5, 1.0, Target::zero(), 0.5, 1.0);
    let r = check_ssc(&p3, &ControlVector::new(vec![[0.5, 0.5]]), &SscOptions::default()).unwrap();
    assert!(r.cone.is_trivial(ConeKind::Tau));
    assert_eq!(r.kappa, f64::INFINITY);
    assert!(r.ssc_holds);
}

#[test]
fn growth_probe() {
    let eta = 1e-3;
    let p = problem(&[[0.5, 0.5]], 0.5, eta, Target::zero(), -1.0, 1.0);
    let r = quadratic_growth_probe(&p, &ControlVector::zeros(1), 1e-2, 20, 5).unwrap();
    assert!(r.violations.is_empty());
    assert!(r.mu >= eta * (1.0 - 1e-6), "{}", r.mu);
    let r = quadratic_growth_probe(&p.with_target(swirl()), &ControlVector::new(vec![[0.3, 0.3]]), 1e-2, 20, 5).unwrap();
    assert!(!r.violations.is_empty());
    assert_eq!(r.mu, 0.0);
}
