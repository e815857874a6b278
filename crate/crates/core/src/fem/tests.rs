use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::mesh::{build_unit_square_mesh, grade_toward_points};
use crate::quadrature::TriangleRule;
use crate::sparse::{dot, norm2, TripletBuilder};
use crate::verification::{observed_orders, velocity_errors, ManufacturedFlow};

fn space(n: usize) -> Arc<TaylorHoodSpace> {
    TaylorHoodSpace::new(Arc::new(build_unit_square_mesh(n).unwrap()))
}

fn random_zero_bc(space: &Arc<TaylorHoodSpace>, rng: &mut ChaCha8Rng) -> VelocityPressureField {
    let mut f = VelocityPressureField::zeros(space.clone(), FieldRole::Data);
    for &d in space.free_dofs() {
        f.velocity[d] = rng.random_range(-1.0..1.0);
    }
    f
}

#[test]
fn viscosity_must_be_positive() {
    assert!(assemble_stokes(&space(2), 0.0).is_err());
    assert!(assemble_stokes(&space(2), -1.0).is_err());
}

#[test]
fn constant_fields_are_in_the_laplacian_kernel() {
    let s = space(4);
    let sys = assemble_stokes(&s, 0.7).unwrap();
    let c = VelocityPressureField::interpolate(s.clone(), |_| [1.3, -0.4]);
    let r = sys.a.matvec(&c.velocity);
    for &d in s.free_dofs() {
        assert!(r[d].abs() < 1e-12);
    }
}

#[test]
fn stiffness_energy_matches_analytic_integral() {
    let s = space(4);
    let nu = 0.3;
    let sys = assemble_stokes(&s, nu).unwrap();
    let f = VelocityPressureField::interpolate(s.clone(), |x| [x[1] * x[1], 0.0]);
    let energy = sys.a.bilinear(&f.velocity, &f.velocity);
    assert!((energy - nu * 4.0 / 3.0).abs() < 1e-10);
    let asym = sys.a.add_scaled(&sys.a.transpose(), -1.0).max_abs();
    assert!(asym <= 1e-12 * sys.a.max_abs());
    let msym = sys.mass.add_scaled(&sys.mass.transpose(), -1.0).max_abs();
    assert_eq!(msym, 0.0);
}

#[test]
fn divergence_of_solenoidal_quadratic_vanishes() {
    let s = space(5);
    let sys = assemble_stokes(&s, 1.0).unwrap();
    for f in [
        VelocityPressureField::interpolate(s.clone(), |x| [x[1], 0.0]),
        VelocityPressureField::interpolate(s.clone(), |x| [x[0] * x[1], -0.5 * x[1] * x[1]]),
    ] {
        let r = sys.b.matvec(&f.velocity);
        assert!(norm2(&r) < 1e-12, "{}", norm2(&r));
    }
    let total: f64 = sys.mean_row.iter().sum();
    assert!((total - 1.0).abs() < 1e-14);
}

#[test]
fn assembly_is_bitwise_reproducible() {
    let s = space(6);
    let a = assemble_stokes(&s, 1.0).unwrap();
    let b = assemble_stokes(&s, 1.0).unwrap();
    assert_eq!(a.a, b.a);
    assert_eq!(a.b, b.b);
    let y = VelocityPressureField::interpolate(s.clone(), |x| [x[0].sin(), x[0] * x[1]]);
    assert_eq!(assemble_convection(&s, &y).unwrap(), assemble_convection(&s, &y).unwrap());
}

#[test]
fn zero_velocity_gives_zero_convection() {
    let s = space(3);
    let y = VelocityPressureField::zeros(s.clone(), FieldRole::State);
    let (c1, c2) = assemble_convection(&s, &y).unwrap();
    assert_eq!(c1.max_abs(), 0.0);
    assert_eq!(c2.max_abs(), 0.0);
}

#[test]
fn convection_rejects_foreign_fields() {
    let y = VelocityPressureField::zeros(space(3), FieldRole::State);
    assert!(assemble_convection(&space(3), &y).is_err());
}

/// Direct quadrature of ∫ (y·∇)θ · w on a refined rule (oracle).
fn direct_advection(y: &VelocityPressureField, theta: &VelocityPressureField, w: &VelocityPressureField) -> f64 {
    let s = y.space();
    let rule = TriangleRule::with_degree(6).refined(2);
    let mut total = 0.0;
    for k in 0..s.n_elements() {
        let area = s.geometry(k).area;
        for (r, wt) in rule.points.iter().zip(&rule.weights) {
            let (yv, _) = s.velocity_in_element(&y.velocity, k, *r);
            let (_, tg) = s.velocity_in_element(&theta.velocity, k, *r);
            let (wv, _) = s.velocity_in_element(&w.velocity, k, *r);
            let adv = [yv[0] * tg[0][0] + yv[1] * tg[0][1], yv[0] * tg[1][0] + yv[1] * tg[1][1]];
            total += 2.0 * area * wt * (adv[0] * wv[0] + adv[1] * wv[1]);
        }
    }
    total
}

#[test]
fn convection_matches_direct_quadrature() {
    let s = space(4);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let y = random_zero_bc(&s, &mut rng);
    let theta = random_zero_bc(&s, &mut rng);
    let w = random_zero_bc(&s, &mut rng);
    let (c1, c2) = assemble_convection(&s, &y).unwrap();
    let assembled = c1.bilinear(&w.velocity, &theta.velocity);
    let direct = direct_advection(&y, &theta, &w);
    assert!((assembled - direct).abs() <= 1e-10 * direct.abs().max(1e-300), "{assembled} vs {direct}");
    // C₂(y)θ = (θ·∇)y, i.e. the advection of y by θ.
    let reaction = c2.bilinear(&w.velocity, &theta.velocity);
    let direct = direct_advection(&theta, &y, &w);
    assert!((reaction - direct).abs() <= 1e-10 * direct.abs());
    // The convective load agrees with the matrix.
    let load = assemble_convective_load(&y, &theta).unwrap();
    let from_matrix = c1.matvec(&theta.velocity);
    for (a, b) in load.iter().zip(&from_matrix) {
        assert!((a - b).abs() < 1e-13);
    }
}

#[test]
fn advection_is_skew_for_solenoidal_transport() {
    let s = space(6);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let theta = random_zero_bc(&s, &mut rng);
    // Constant transport: ∫ (y·∇)θ·θ = ½∮ (y·n)|θ|² = 0 for θ = 0 on ∂Ω.
    let y = VelocityPressureField::interpolate(s.clone(), |_| [1.0, 0.5]);
    let (c1, _) = assemble_convection(&s, &y).unwrap();
    let q = c1.bilinear(&theta.velocity, &theta.velocity);
    assert!(q.abs() <= 1e-12 * dot(&theta.velocity, &theta.velocity), "{q}");

    // Discretely divergence-free transport with no-slip: θᵀC₁θ equals
    // -½ ∫ div(y)|θ|², which is small but not zero.
    let sys = assemble_stokes(&s, 1.0).unwrap();
    let load = assemble_function_load(&s, 6, |x| [(3.0 * x[1]).sin(), x[0] * x[0]]);
    let y = solve_saddle(&sys, None, &load, FieldRole::State).unwrap();
    let (c1, _) = assemble_convection(&s, &y).unwrap();
    let q = c1.bilinear(&theta.velocity, &theta.velocity);
    let rule = TriangleRule::with_degree(8);
    let mut ibp = 0.0;
    for k in 0..s.n_elements() {
        let area = s.geometry(k).area;
        for (r, w) in rule.points.iter().zip(&rule.weights) {
            let (_, yg) = s.velocity_in_element(&y.velocity, k, *r);
            let (tv, _) = s.velocity_in_element(&theta.velocity, k, *r);
            ibp += -0.5 * 2.0 * area * w * (yg[0][0] + yg[1][1]) * (tv[0] * tv[0] + tv[1] * tv[1]);
        }
    }
    assert!((q - ibp).abs() <= 1e-10 * ibp.abs().max(1e-14), "{q} vs {ibp}");
    let scale = y.velocity_h1_seminorm() * theta.velocity_l2_norm().powi(2);
    assert!(q.abs() < 1e-2 * scale);
}

#[test]
fn dirac_load_hits_vertex_dofs() {
    let s = space(4);
    let zero = assemble_dirac_load(&s, &[[0.5, 0.5]], &[[0.0, 0.0]]).unwrap();
    assert!(zero.iter().all(|&v| v == 0.0));
    let f = assemble_dirac_load(&s, &[[0.5, 0.5]], &[[1.0, 0.0]]).unwrap();
    let nonzero: Vec<usize> = (0..f.len()).filter(|&i| f[i] != 0.0).collect();
    let v = s.mesh().find_node([0.5, 0.5], 0.0).unwrap();
    assert_eq!(nonzero, vec![2 * v]);
    assert_eq!(f[2 * v], 1.0);
    assert!(assemble_dirac_load(&s, &[[1.5, 0.5]], &[[1.0, 0.0]]).is_err());
}

#[test]
fn dirac_load_pairs_with_point_values() {
    let mesh = build_unit_square_mesh(5).unwrap();
    let pts = [[0.5, 0.5], [0.31, 0.77]];
    let graded = Arc::new(grade_toward_points(&mesh, &pts[..1], 2, 0.5).unwrap());
    let s = TaylorHoodSpace::new(graded);
    let amps = [[0.7, -1.1], [2.0, 0.25]];
    let f = assemble_dirac_load(&s, &pts, &amps).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..5 {
        let v = random_zero_bc(&s, &mut rng);
        let lhs = dot(&f, &v.velocity);
        let rhs: f64 = pts
            .iter()
            .zip(&amps)
            .map(|(p, u)| {
                let val = v.evaluate_velocity_at(*p).unwrap();
                u[0] * val[0] + u[1] * val[1]
            })
            .sum();
        assert!((lhs - rhs).abs() <= 1e-14 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
    }
}

#[test]
fn saddle_zero_rhs_and_symmetry() {
    let s = space(6);
    let sys = assemble_stokes(&s, 1.0).unwrap();
    let op = sys.operator(None).unwrap();
    let z = op.solve(&vec![0.0; s.n_u()], None, FieldRole::State).unwrap();
    assert!(z.velocity.iter().all(|&v| v == 0.0));
    let f = assemble_function_load(&s, 4, |x| [x[1], 1.0 - x[0]]);
    let g = assemble_function_load(&s, 4, |x| [(x[0] * 5.0).cos(), x[1] * x[1]]);
    let uf = op.solve(&f, None, FieldRole::State).unwrap();
    let ug = op.solve(&g, None, FieldRole::State).unwrap();
    let a = dot(&g, &uf.velocity);
    let b = dot(&f, &ug.velocity);
    assert!((a - b).abs() <= 1e-10 * a.abs());
    assert!(uf.max_boundary_velocity() == 0.0);
    assert!(uf.pressure_mean_integral().abs() < 1e-13);
}

#[test]
fn singular_linearization_is_reported() {
    let s = space(3);
    let sys = assemble_stokes(&s, 1.0).unwrap();
    // Cancel the viscous block on the interior dofs: the velocity block
    // becomes zero and the saddle matrix loses rank.
    let neg = CsrMatrixExt::negated(&sys.a);
    match sys.operator(Some(&neg)) {
        Err(crate::PfError::SingularSystem { .. }) => {}
        Ok(op) => {
            let f = assemble_function_load(&s, 4, |_| [1.0, 0.0]);
            assert!(matches!(op.solve(&f, None, FieldRole::State), Err(crate::PfError::SingularSystem { .. })));
        }
        Err(e) => panic!("unexpected error {e}"),
    }
}

struct CsrMatrixExt;
impl CsrMatrixExt {
    fn negated(m: &crate::sparse::CsrMatrix) -> crate::sparse::CsrMatrix {
        let mut b = TripletBuilder::new(m.nrows(), m.ncols());
        for (i, j, v) in m.triplets() {
            b.push(i, j, -v);
        }
        b.build()
    }
}

#[test]
fn manufactured_stokes_converges_at_second_order() {
    let flow = ManufacturedFlow;
    let nu = 1.0;
    let mut hs = Vec::new();
    let mut h1 = Vec::new();
    for n in [8, 16, 32] {
        let s = space(n);
        let sys = assemble_stokes(&s, nu).unwrap();
        let load = assemble_function_load(&s, 8, |x| flow.forcing(nu, false, x));
        let u = solve_saddle(&sys, None, &load, FieldRole::State).unwrap();
        let (_, e1) = velocity_errors(&u, |x| flow.velocity(x), |x| flow.gradient(x));
        hs.push(1.0 / n as f64);
        h1.push(e1);
    }
    let orders = observed_orders(&hs, &h1);
    for o in &orders {
        assert!((o - 2.0).abs() < 0.25, "{orders:?}");
    }
}

/// Smallest eigenvalue of `M_p⁻¹ B A⁻¹ Bᵀ` on zero-mean pressures by
/// inverse iteration through the saddle solve.
fn inf_sup_constant(n: usize) -> f64 {
    let s = space(n);
    let sys = assemble_stokes(&s, 1.0).unwrap();
    let op = sys.operator(None).unwrap();
    let mesh = s.mesh();
    let mut mp = TripletBuilder::new(s.n_p(), s.n_p());
    for k in 0..mesh.n_triangles() {
        let t = mesh.triangles()[k];
        let a = mesh.area(k);
        for i in 0..3 {
            for j in 0..3 {
                mp.push(t[i], t[j], if i == j { a / 6.0 } else { a / 12.0 });
            }
        }
    }
    let mp = mp.build();
    let mut p: Vec<f64> = mesh.nodes().iter().map(|x| (7.0 * x[0]).sin() + x[1] * x[1] - 0.3).collect();
    let mut lambda = 0.0;
    for _ in 0..80 {
        let g: Vec<f64> = mp.matvec(&p).iter().map(|v| -v).collect();
        let x = op.solve(&vec![0.0; s.n_u()], Some(&g), FieldRole::Data).unwrap();
        let next = x.pressure;
        // Rayleigh quotient pᵀSp / pᵀM_p p with S p = M_p p_prev.
        let mpn = mp.matvec(&next);
        let num = dot(&next, &mp.matvec(&p));
        let den = dot(&next, &mpn);
        lambda = num / den;
        let scale = den.sqrt();
        p = next.iter().map(|v| v / scale).collect();
    }
    lambda.sqrt()
}

#[test]
fn discrete_inf_sup_is_stable_under_refinement() {
    let betas: Vec<f64> = [8, 16, 32].iter().map(|&n| inf_sup_constant(n)).collect();
    for b in &betas {
        assert!(*b > 0.05, "{betas:?}");
    }
    for w in betas.windows(2) {
        assert!(w[1] / w[0] >= 0.5, "{betas:?}");
    }
}
