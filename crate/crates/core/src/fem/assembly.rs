//! Element loops for the Stokes blocks, convection matrices and load
//! vectors. All loops run over elements in index order, which keeps the
//! assembled values reproducible bit for bit.

use super::space::{p2_eval, TaylorHoodSpace};
use super::field::VelocityPressureField;
use crate::error::{invalid, PfError, Result};
use crate::quadrature::TriangleRule;
use crate::sparse::{CsrMatrix, TripletBuilder};
use crate::Point;

/// Quadrature degree for Stokes blocks (exact for P2/P1 products).
pub const STOKES_DEGREE: usize = 4;
/// Quadrature degree for trilinear convection terms (exact for P2³ with one
/// derivative).
pub const CONVECTION_DEGREE: usize = 6;

pub(super) struct StokesBlocks {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub mass: CsrMatrix,
    pub mean_row: Vec<f64>,
}

pub(super) fn stokes_blocks(space: &TaylorHoodSpace, nu: f64) -> StokesBlocks {
    let rule = TriangleRule::with_degree(STOKES_DEGREE);
    let nu_dofs = space.n_u();
    let np = space.n_p();
    let ne = space.n_elements();
    let mut a = TripletBuilder::with_capacity(nu_dofs, nu_dofs, ne * 72);
    let mut mass = TripletBuilder::with_capacity(nu_dofs, nu_dofs, ne * 72);
    let mut b = TripletBuilder::with_capacity(np, nu_dofs, ne * 36);
    let mut mean_row = vec![0.0; np];
    let mesh = space.mesh();
    for k in 0..ne {
        let geo = space.geometry(k);
        let dofs = space.scalar_dofs(k);
        let tri = mesh.triangles()[k];
        let mut stiff = [[0.0; 6]; 6];
        let mut m = [[0.0; 6]; 6];
        // div[q][(b, c)] = ∫ λ_q ∂_c ψ_b
        let mut div = [[[0.0; 2]; 6]; 3];
        for (r, w) in rule.points.iter().zip(&rule.weights) {
            let wt = 2.0 * geo.area * w;
            let ev = p2_eval(geo, *r);
            let lam = [1.0 - r[0] - r[1], r[0], r[1]];
            for i in 0..6 {
                for j in i..6 {
                    stiff[i][j] += wt * (ev.grad[i][0] * ev.grad[j][0] + ev.grad[i][1] * ev.grad[j][1]);
                    m[i][j] += wt * ev.value[i] * ev.value[j];
                }
                for q in 0..3 {
                    div[q][i][0] += wt * lam[q] * ev.grad[i][0];
                    div[q][i][1] += wt * lam[q] * ev.grad[i][1];
                }
            }
        }
        for i in 0..6 {
            for j in 0..i {
                stiff[i][j] = stiff[j][i];
                m[i][j] = m[j][i];
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                for c in 0..2 {
                    a.push(2 * dofs[i] + c, 2 * dofs[j] + c, nu * stiff[i][j]);
                    mass.push(2 * dofs[i] + c, 2 * dofs[j] + c, m[i][j]);
                }
            }
        }
        for q in 0..3 {
            for i in 0..6 {
                for c in 0..2 {
                    b.push(tri[q], 2 * dofs[i] + c, -div[q][i][c]);
                }
            }
            mean_row[tri[q]] += geo.area / 3.0;
        }
    }
    StokesBlocks { a: a.build(), b: b.build(), mass: mass.build(), mean_row }
}

/// Convection matrices at velocity `y`:
/// `C₁(y)θ` tests `(y·∇)θ` and `C₂(y)θ` tests `(θ·∇)y` against each basis
/// function. `C₁ + C₂` is the Jacobian of the convective term `C₁(y)y`.
pub fn assemble_convection(space: &TaylorHoodSpace, y: &VelocityPressureField) -> Result<(CsrMatrix, CsrMatrix)> {
    if !std::ptr::eq(space, y.space().as_ref()) {
        return Err(invalid("convection velocity lives on a different space"));
    }
    let rule = TriangleRule::with_degree(CONVECTION_DEGREE);
    let n = space.n_u();
    let ne = space.n_elements();
    let mut c1 = TripletBuilder::with_capacity(n, n, ne * 72);
    let mut c2 = TripletBuilder::with_capacity(n, n, ne * 144);
    for k in 0..ne {
        let geo = space.geometry(k);
        let dofs = space.scalar_dofs(k);
        let mut adv = [[0.0; 6]; 6];
        let mut react = [[[[0.0; 2]; 2]; 6]; 6];
        for (r, w) in rule.points.iter().zip(&rule.weights) {
            let wt = 2.0 * geo.area * w;
            let ev = p2_eval(geo, *r);
            let (yv, yg) = space.combine(&y.velocity, k, &ev);
            for i in 0..6 {
                for j in 0..6 {
                    let ydg = yv[0] * ev.grad[j][0] + yv[1] * ev.grad[j][1];
                    adv[i][j] += wt * ev.value[i] * ydg;
                    let vv = wt * ev.value[i] * ev.value[j];
                    for c in 0..2 {
                        for d in 0..2 {
                            react[i][j][c][d] += vv * yg[c][d];
                        }
                    }
                }
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                for c in 0..2 {
                    c1.push(2 * dofs[i] + c, 2 * dofs[j] + c, adv[i][j]);
                    for d in 0..2 {
                        c2.push(2 * dofs[i] + c, 2 * dofs[j] + d, react[i][j][c][d]);
                    }
                }
            }
        }
    }
    Ok((c1.build(), c2.build()))
}

fn vector_load<F>(space: &TaylorHoodSpace, degree: usize, mut integrand: F) -> Vec<f64>
where
    F: FnMut(usize, Point, &super::space::P2Eval, usize) -> [f64; 2],
{
    let rule = TriangleRule::with_degree(degree);
    let mut out = vec![0.0; space.n_u()];
    for k in 0..space.n_elements() {
        let geo = space.geometry(k);
        let dofs = space.scalar_dofs(k);
        let mut local = [[0.0; 2]; 6];
        for (r, w) in rule.points.iter().zip(&rule.weights) {
            let wt = 2.0 * geo.area * w;
            let ev = p2_eval(geo, *r);
            let x = geo.map(*r);
            for (i, l) in local.iter_mut().enumerate() {
                let f = integrand(k, x, &ev, i);
                l[0] += wt * f[0];
                l[1] += wt * f[1];
            }
        }
        for i in 0..6 {
            out[2 * dofs[i]] += local[i][0];
            out[2 * dofs[i] + 1] += local[i][1];
        }
    }
    out
}

/// `F_i = ∫ f · φ_i` with a quadrature rule of the given degree.
pub fn assemble_function_load(space: &TaylorHoodSpace, degree: usize, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
    vector_load(space, degree, |_, x, ev, i| {
        let v = f(x);
        [v[0] * ev.value[i], v[1] * ev.value[i]]
    })
}

/// `F_i = ∫ f(x, v(x)) · φ_i` for a discrete velocity `v`.
pub fn assemble_field_load(
    v: &VelocityPressureField,
    degree: usize,
    mut f: impl FnMut(Point, [f64; 2]) -> [f64; 2],
) -> Vec<f64> {
    let space = v.space().clone();
    let mut cache = [0.0; 2];
    vector_load(&space, degree, |k, x, ev, i| {
        if i == 0 {
            cache = f(x, space.combine(&v.velocity, k, ev).0);
        }
        [cache[0] * ev.value[i], cache[1] * ev.value[i]]
    })
}

/// Element, point, value of `a` and gradient of `b` at the last quadrature point.
type PointCache = Option<(usize, Point, [f64; 2], [[f64; 2]; 2])>;

/// `F_i = ∫ (a·∇)b · φ_i`.
pub fn assemble_convective_load(a: &VelocityPressureField, b: &VelocityPressureField) -> Result<Vec<f64>> {
    if !a.same_space(b) {
        return Err(invalid("fields live on different spaces"));
    }
    let space = a.space().clone();
    let mut cache: PointCache = None;
    Ok(vector_load(&space, CONVECTION_DEGREE, |k, x, ev, i| {
        if i == 0 || cache.is_none() {
            let (av, _) = space.combine(&a.velocity, k, ev);
            let (_, bg) = space.combine(&b.velocity, k, ev);
            cache = Some((k, x, av, bg));
        }
        let (_, _, av, bg) = cache.unwrap();
        let adv = [av[0] * bg[0][0] + av[1] * bg[0][1], av[0] * bg[1][0] + av[1] * bg[1][1]];
        [adv[0] * ev.value[i], adv[1] * ev.value[i]]
    }))
}

/// `F_i = ∫ (a⊗b) : ∇φ_i = Σ_{c,d} ∫ a_c b_d ∂_d (φ_i)_c`.
pub fn assemble_tensor_load(a: &VelocityPressureField, b: &VelocityPressureField) -> Result<Vec<f64>> {
    if !a.same_space(b) {
        return Err(invalid("fields live on different spaces"));
    }
    let space = a.space().clone();
    let mut cache: Option<([f64; 2], [f64; 2])> = None;
    Ok(vector_load(&space, CONVECTION_DEGREE, |k, _, ev, i| {
        if i == 0 || cache.is_none() {
            cache = Some((space.combine(&a.velocity, k, ev).0, space.combine(&b.velocity, k, ev).0));
        }
        let (av, bv) = cache.unwrap();
        let bdg = bv[0] * ev.grad[i][0] + bv[1] * ev.grad[i][1];
        [av[0] * bdg, av[1] * bdg]
    }))
}

/// Point-force load `F_i = Σ_t u_t · φ_i(t)`. Sources located at mesh
/// vertices load exactly the two dofs of that vertex.
pub fn assemble_dirac_load(space: &TaylorHoodSpace, points: &[Point], amplitudes: &[[f64; 2]]) -> Result<Vec<f64>> {
    if points.len() != amplitudes.len() {
        return Err(invalid("one amplitude per source point is required"));
    }
    let mesh = space.mesh();
    let tol = 1e-12 * mesh.domain().diameter();
    let mut out = vec![0.0; space.n_u()];
    for (t, u) in points.iter().zip(amplitudes) {
        let (k, lam) = mesh.locate_point(*t).map_err(|_| PfError::NotFound(format!("source ({}, {}) is not in the mesh", t[0], t[1])))?;
        let tri = mesh.triangles()[k];
        if let Some(i) = (0..3).find(|&i| crate::mesh::dist(mesh.nodes()[tri[i]], *t) <= tol) {
            out[2 * tri[i]] += u[0];
            out[2 * tri[i] + 1] += u[1];
            continue;
        }
        let ev = super::space::p2_eval_bary(space.geometry(k), lam);
        for (a, &s) in space.scalar_dofs(k).iter().enumerate() {
            out[2 * s] += u[0] * ev.value[a];
            out[2 * s + 1] += u[1] * ev.value[a];
        }
    }
    Ok(out)
}
