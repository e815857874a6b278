use std::sync::Arc;

use crate::mesh::TriMesh;
use crate::quadrature::TriangleRule;
use crate::Point;

/// Affine data of one triangle: vertices, area and the constant gradients
/// of the barycentric coordinates.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub vertices: [Point; 3],
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(vertices: [Point; 3]) -> Self {
        let [a, b, c] = vertices;
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        let g1 = [(c[1] - a[1]) / det, -(c[0] - a[0]) / det];
        let g2 = [-(b[1] - a[1]) / det, (b[0] - a[0]) / det];
        let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
        ElementGeometry { vertices, area: 0.5 * det, grad_lambda: [g0, g1, g2] }
    }

    /// Physical point of the reference coordinates `(ξ, η)`.
    pub fn map(&self, r: Point) -> Point {
        let [a, b, c] = self.vertices;
        [a[0] + (b[0] - a[0]) * r[0] + (c[0] - a[0]) * r[1], a[1] + (b[1] - a[1]) * r[0] + (c[1] - a[1]) * r[1]]
    }
}

/// Values and physical gradients of the six quadratic basis functions
/// (vertices 0..3, then edge midpoints 01, 12, 20) at a reference point.
#[derive(Debug, Clone, Copy)]
pub struct P2Eval {
    pub value: [f64; 6],
    pub grad: [[f64; 2]; 6],
}

pub fn p2_eval(geo: &ElementGeometry, r: Point) -> P2Eval {
    p2_eval_bary(geo, [1.0 - r[0] - r[1], r[0], r[1]])
}

pub fn p2_eval_bary(geo: &ElementGeometry, l: [f64; 3]) -> P2Eval {
    let g = &geo.grad_lambda;
    let mut value = [0.0; 6];
    let mut grad = [[0.0; 2]; 6];
    for i in 0..3 {
        value[i] = l[i] * (2.0 * l[i] - 1.0);
        let s = 4.0 * l[i] - 1.0;
        grad[i] = [s * g[i][0], s * g[i][1]];
        let j = (i + 1) % 3;
        value[3 + i] = 4.0 * l[i] * l[j];
        grad[3 + i] = [4.0 * (l[i] * g[j][0] + l[j] * g[i][0]), 4.0 * (l[i] * g[j][1] + l[j] * g[i][1])];
    }
    P2Eval { value, grad }
}

/// Taylor-Hood P2/P1 space on a mesh with homogeneous Dirichlet velocity.
///
/// Scalar quadratic dofs are numbered nodes first, then edges. Velocity dof
/// `2s + c` is component `c` of scalar dof `s`. Pressure dofs are the mesh
/// nodes.
#[derive(Debug)]
pub struct TaylorHoodSpace {
    mesh: Arc<TriMesh>,
    geometry: Vec<ElementGeometry>,
    free_index: Vec<Option<usize>>,
    free_dofs: Vec<usize>,
    boundary_dofs: Vec<usize>,
}

impl TaylorHoodSpace {
    pub fn new(mesh: Arc<TriMesh>) -> Arc<Self> {
        let geometry = (0..mesh.n_triangles()).map(|k| ElementGeometry::new(mesh.vertices_of(k))).collect();
        let nn = mesh.n_nodes();
        let n_scalar = nn + mesh.n_edges();
        let mut on_boundary = vec![false; n_scalar];
        for (v, &b) in mesh.boundary_node_flags().iter().enumerate() {
            on_boundary[v] = b;
        }
        for (e, &b) in mesh.boundary_edge_flags().iter().enumerate() {
            on_boundary[nn + e] = b;
        }
        let mut free_index = vec![None; 2 * n_scalar];
        let mut free_dofs = Vec::new();
        let mut boundary_dofs = Vec::new();
        for d in 0..2 * n_scalar {
            if on_boundary[d / 2] {
                boundary_dofs.push(d);
            } else {
                free_index[d] = Some(free_dofs.len());
                free_dofs.push(d);
            }
        }
        Arc::new(TaylorHoodSpace { mesh, geometry, free_index, free_dofs, boundary_dofs })
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }
    pub fn n_scalar(&self) -> usize {
        self.mesh.n_nodes() + self.mesh.n_edges()
    }
    /// Number of velocity coefficients, `2 × (#nodes + #edges)`.
    pub fn n_u(&self) -> usize {
        2 * self.n_scalar()
    }
    pub fn n_p(&self) -> usize {
        self.mesh.n_nodes()
    }
    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }
    pub fn geometry(&self, k: usize) -> &ElementGeometry {
        &self.geometry[k]
    }
    pub fn n_elements(&self) -> usize {
        self.geometry.len()
    }
    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }
    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }
    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }

    /// Scalar quadratic dofs of element `k` in local basis order.
    pub fn scalar_dofs(&self, k: usize) -> [usize; 6] {
        let t = self.mesh.triangles()[k];
        let e = self.mesh.triangle_edges()[k];
        let nn = self.mesh.n_nodes();
        [t[0], t[1], t[2], nn + e[0], nn + e[1], nn + e[2]]
    }

    /// Physical location of each scalar dof (nodes, then edge midpoints).
    pub fn scalar_dof_points(&self) -> Vec<Point> {
        let nodes = self.mesh.nodes();
        let mut pts = nodes.to_vec();
        pts.extend(self.mesh.edges().iter().map(|&[a, b]| crate::mesh::midpoint(nodes[a], nodes[b])));
        pts
    }

    /// Velocity value and gradient (`grad[c][d] = ∂_d u_c`) of coefficient
    /// vector `u` at reference point `r` of element `k`.
    pub fn velocity_in_element(&self, u: &[f64], k: usize, r: Point) -> ([f64; 2], [[f64; 2]; 2]) {
        let ev = p2_eval(&self.geometry[k], r);
        self.combine(u, k, &ev)
    }

    pub(crate) fn combine(&self, u: &[f64], k: usize, ev: &P2Eval) -> ([f64; 2], [[f64; 2]; 2]) {
        let dofs = self.scalar_dofs(k);
        let mut val = [0.0; 2];
        let mut grad = [[0.0; 2]; 2];
        for (a, &s) in dofs.iter().enumerate() {
            for c in 0..2 {
                let coef = u[2 * s + c];
                val[c] += coef * ev.value[a];
                grad[c][0] += coef * ev.grad[a][0];
                grad[c][1] += coef * ev.grad[a][1];
            }
        }
        (val, grad)
    }

    /// Integrates `f(k, x, value, grad)` of the velocity `u` over the mesh,
    /// element by element with `rule`.
    pub fn integrate_velocity<F>(&self, u: &[f64], rule: &TriangleRule, mut f: F) -> f64
    where
        F: FnMut(usize, Point, [f64; 2], [[f64; 2]; 2]) -> f64,
    {
        let mut total = 0.0;
        for k in 0..self.n_elements() {
            let geo = &self.geometry[k];
            let mut local = 0.0;
            for (r, w) in rule.points.iter().zip(&rule.weights) {
                let (v, g) = self.velocity_in_element(u, k, *r);
                local += w * f(k, geo.map(*r), v, g);
            }
            total += 2.0 * geo.area * local;
        }
        total
    }
}
