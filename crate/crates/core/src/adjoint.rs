//! Discrete adjoint of the state equation and the tracking functional.

use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::fem::{assemble_field_load, FieldRole, TaylorHoodSpace, VelocityPressureField};
use crate::quadrature::TriangleRule;
use crate::state::StateSolution;
use crate::weights::DiracSourceSet;
use crate::Point;

/// Degree of the rule used for the tracking term and its derivative.
pub const TRACKING_DEGREE: usize = 8;

/// Desired velocity `y_Ω`.
#[derive(Clone)]
pub enum Target {
    Analytic(Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>),
    Discrete(VelocityPressureField),
}

impl fmt::Debug for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Analytic(_) => f.write_str("Target::Analytic"),
            Target::Discrete(field) => f.debug_tuple("Target::Discrete").field(&field.space().n_u()).finish(),
        }
    }
}

impl Target {
    pub fn analytic(f: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static) -> Self {
        Target::Analytic(Arc::new(f))
    }

    pub fn zero() -> Self {
        Target::analytic(|_| [0.0, 0.0])
    }

    /// Value at `x`; `element` is the element of the evaluating space that
    /// contains `x` with reference coordinates `r`, used as a fast path for
    /// discrete targets on that same space.
    fn value(&self, space: &TaylorHoodSpace, element: usize, r: Point, x: Point) -> Result<[f64; 2]> {
        match self {
            Target::Analytic(f) => Ok(f(x)),
            Target::Discrete(field) => {
                if std::ptr::eq(field.space().as_ref(), space) {
                    Ok(space.velocity_in_element(&field.velocity, element, r).0)
                } else {
                    field.evaluate_velocity_at(x)
                }
            }
        }
    }

    /// Target values at every point of the tracking rule, element by element.
    fn sample(&self, space: &TaylorHoodSpace, rule: &TriangleRule) -> Result<Vec<[f64; 2]>> {
        let mut out = Vec::with_capacity(space.n_elements() * rule.len());
        for k in 0..space.n_elements() {
            let geo = space.geometry(k);
            for r in &rule.points {
                out.push(self.value(space, k, *r, geo.map(*r))?);
            }
        }
        Ok(out)
    }
}

/// `½ ∫ |y - y_Ω|²` by element quadrature of degree [`TRACKING_DEGREE`].
pub fn tracking_cost(y: &VelocityPressureField, target: &Target) -> Result<f64> {
    let space = y.space();
    let rule = TriangleRule::with_degree(TRACKING_DEGREE);
    let samples = target.sample(space, &rule)?;
    let mut idx = 0;
    let total = space.integrate_velocity(&y.velocity, &rule, |_, _, v, _| {
        let t = samples[idx];
        idx += 1;
        let d = [v[0] - t[0], v[1] - t[1]];
        d[0] * d[0] + d[1] * d[1]
    });
    Ok(0.5 * total)
}

/// `g_i = ∫ (y - y_Ω) · φ_i` with the same rule as [`tracking_cost`], so
/// that `g` is the exact gradient of the discrete tracking term.
pub fn tracking_load(y: &VelocityPressureField, target: &Target) -> Result<Vec<f64>> {
    let space = y.space();
    let rule = TriangleRule::with_degree(TRACKING_DEGREE);
    let samples = target.sample(space, &rule)?;
    let mut idx = 0usize;
    Ok(assemble_field_load(y, TRACKING_DEGREE, |_, v| {
        let t = samples[idx];
        idx += 1;
        [v[0] - t[0], v[1] - t[1]]
    }))
}

#[derive(Debug, Clone)]
pub struct AdjointSolution {
    pub field: VelocityPressureField,
    /// `z(t)` at each source, in source order.
    pub point_values: Vec<[f64; 2]>,
    /// `½ ∫ |y - y_Ω|²` at the state the adjoint was solved for.
    pub tracking_cost: f64,
}

/// Solves `Jᵀ (z, r) = (g, 0)` with the state Jacobian `J` and the tracking
/// load `g`, reusing the state's factorization.
pub fn solve_adjoint(state: &StateSolution, target: &Target, sources: &DiracSourceSet) -> Result<AdjointSolution> {
    state.require_converged()?;
    let g = tracking_load(&state.field, target)?;
    let field = state.jacobian().solve_transpose(&g, None, FieldRole::Adjoint)?;
    let point_values = sources.points().iter().map(|&t| field.evaluate_velocity_at(t)).collect::<Result<Vec<_>>>()?;
    let tracking_cost = tracking_cost(&state.field, target)?;
    Ok(AdjointSolution { field, point_values, tracking_cost })
}

pub fn adjoint_point_values(adj: &AdjointSolution) -> Vec<[f64; 2]> {
    adj.point_values.clone()
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::fem::{assemble_dirac_load, assemble_stokes, TaylorHoodSpace};
    use crate::mesh::{build_unit_square_mesh, grade_toward_points, PolygonDomain};
    use crate::sparse::dot;
    use crate::state::{solve_linearized, solve_state, StateSolveOptions};

    fn setup(n: usize, points: &[Point]) -> (Arc<crate::fem::SaddleSystem>, DiracSourceSet) {
        let base = build_unit_square_mesh(n).unwrap();
        let mesh = grade_toward_points(&base, points, 2, 0.5).unwrap();
        let space = TaylorHoodSpace::new(Arc::new(mesh));
        (
            Arc::new(assemble_stokes(&space, 0.1).unwrap()),
            DiracSourceSet::new(points.to_vec(), &PolygonDomain::unit_square()).unwrap(),
        )
    }

    #[test]
    fn tracking_cost_of_constant_target() {
        let (sys, _) = setup(4, &[[0.5, 0.5]]);
        let y = VelocityPressureField::zeros(sys.space().clone(), FieldRole::State);
        let c = tracking_cost(&y, &Target::analytic(|_| [1.0, 0.0])).unwrap();
        assert!((c - 0.5).abs() < 1e-14);
        let c = tracking_cost(&y, &Target::analytic(|x| [x[0], x[1] * x[1]])).unwrap();
        // ½ (1/3 + 1/5)
        assert!((c - 4.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn target_equal_to_state_gives_zero_adjoint() {
        let (sys, src) = setup(6, &[[0.5, 0.5]]);
        let s = solve_state(&sys, &src, &[[1.0, 2.0]], &StateSolveOptions::default()).unwrap();
        let adj = solve_adjoint(&s, &Target::Discrete(s.field.clone()), &src).unwrap();
        assert!(adj.field.velocity.iter().chain(&adj.field.pressure).all(|&v| v == 0.0));
        assert_eq!(adjoint_point_values(&adj), vec![[0.0, 0.0]]);
        assert_eq!(adj.tracking_cost, 0.0);
    }

    #[test]
    fn transpose_identity() {
        let (sys, src) = setup(6, &[[0.5, 0.5]]);
        let s = solve_state(&sys, &src, &[[1.0, -1.0]], &StateSolveOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = sys.space().n_u();
        let mut f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for &d in sys.space().boundary_dofs() {
            f[d] = 0.0;
            g[d] = 0.0;
        }
        let u = solve_linearized(&s, &f).unwrap();
        let w = s.jacobian().solve_transpose(&g, None, FieldRole::Adjoint).unwrap();
        let a = dot(&g, &u.velocity);
        let b = dot(&w.velocity, &f);
        assert!((a - b).abs() <= 1e-10 * a.abs(), "{a} vs {b}");
    }

    #[test]
    fn duality_with_sensitivities() {
        let pts = [[0.35, 0.5], [0.7, 0.6]];
        let (sys, src) = setup(8, &pts);
        let target = Target::analytic(|x| [(3.0 * x[1]).sin(), x[0] * (1.0 - x[0])]);
        let s = solve_state(&sys, &src, &[[1.0, 0.3], [-0.5, 0.8]], &StateSolveOptions::default()).unwrap();
        let adj = solve_adjoint(&s, &target, &src).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rule = TriangleRule::with_degree(TRACKING_DEGREE);
        for _ in 0..5 {
            let v: Vec<[f64; 2]> = (0..2).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
            let lhs: f64 = v.iter().zip(&adj.point_values).map(|(a, b)| a[0] * b[0] + a[1] * b[1]).sum();
            let theta = solve_linearized(&s, &assemble_dirac_load(sys.space(), &pts, &v).unwrap()).unwrap();
            let rhs = sys.space().integrate_velocity(&s.field.velocity, &rule, |_, x, y, _| {
                let t = match &target {
                    Target::Analytic(f) => f(x),
                    Target::Discrete(_) => unreachable!(),
                };
                let th = theta.evaluate_velocity_at(x).unwrap();
                (y[0] - t[0]) * th[0] + (y[1] - t[1]) * th[1]
            });
            assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs(), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn point_values_of_interpolated_field() {
        let (sys, src) = setup(4, &[[0.5, 0.5]]);
        let z = VelocityPressureField::interpolate(sys.space().clone(), |x| [x[1], -x[0]]);
        let adj = AdjointSolution {
            point_values: src.points().iter().map(|&t| z.evaluate_velocity_at(t).unwrap()).collect(),
            field: z,
            tracking_cost: 0.0,
        };
        let v = adjoint_point_values(&adj)[0];
        assert!((v[0] - 0.5).abs() < 1e-15 && (v[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn point_values_settle_under_refinement() {
        let t = [0.5, 0.5];
        let target = Target::analytic(|x| [x[1] * (1.0 - x[1]), 0.0]);
        let mut vals = Vec::new();
        for n in [8, 16, 32] {
            let (sys, src) = setup(n, &[t]);
            let s = solve_state(&sys, &src, &[[0.5, 0.5]], &StateSolveOptions::default()).unwrap();
            vals.push(solve_adjoint(&s, &target, &src).unwrap().point_values[0]);
        }
        let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        assert!(d(vals[1], vals[2]) < d(vals[0], vals[1]), "{vals:?}");
    }
}
