//! Conforming triangular meshes of polygonal domains.
//!
//! Triangles are stored counter-clockwise. Local edge `i` of a triangle joins
//! vertices `i` and `(i + 1) % 3`; this is the ordering used for the
//! quadratic edge degrees of freedom in [`crate::fem`].

mod domain;
mod grading;
mod locate;

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

pub use domain::PolygonDomain;
pub use grading::grade_toward_points;
pub(crate) use domain::{dist, point_segment_distance};
use locate::BucketGrid;

use crate::error::{invalid, PfError, Result};
use crate::Point;

#[derive(Debug, Clone)]
pub struct TriMesh {
    domain: PolygonDomain,
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_node_flags: Vec<bool>,
    element_diameters: Vec<f64>,
    edges: Vec<[usize; 2]>,
    triangle_edges: Vec<[usize; 3]>,
    boundary_edge_flags: Vec<bool>,
    grid: BucketGrid,
}

impl TriMesh {
    /// Builds the mesh and all derived connectivity. Fails if a triangle is
    /// not positively oriented or an edge is shared by more than two
    /// triangles.
    pub fn new(domain: PolygonDomain, nodes: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        for (k, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= nodes.len()) {
                return Err(invalid(format!("triangle {k} references a missing node")));
            }
            if signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]) <= 0.0 {
                return Err(invalid(format!("triangle {k} is not positively oriented")));
            }
        }
        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_count = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for t in &triangles {
            let mut te = [0; 3];
            for i in 0..3 {
                let key = edge_key(t[i], t[(i + 1) % 3]);
                let id = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_count.push(0usize);
                    edges.len() - 1
                });
                edge_count[id] += 1;
                te[i] = id;
            }
            triangle_edges.push(te);
        }
        if let Some(e) = edge_count.iter().position(|&c| c > 2) {
            return Err(invalid(format!("edge {:?} shared by more than two triangles", edges[e])));
        }
        let boundary_edge_flags: Vec<bool> = edge_count.iter().map(|&c| c == 1).collect();
        let mut boundary_node_flags = vec![false; nodes.len()];
        for (e, &b) in edges.iter().zip(&boundary_edge_flags) {
            if b {
                boundary_node_flags[e[0]] = true;
                boundary_node_flags[e[1]] = true;
            }
        }
        let element_diameters = triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|v| nodes[v]);
                dist(a, b).max(dist(b, c)).max(dist(c, a))
            })
            .collect();
        let grid = BucketGrid::new(&nodes, &triangles);
        Ok(TriMesh {
            domain,
            nodes,
            triangles,
            boundary_node_flags,
            element_diameters,
            edges,
            triangle_edges,
            boundary_edge_flags,
            grid,
        })
    }

    pub fn domain(&self) -> &PolygonDomain {
        &self.domain
    }
    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }
    pub fn boundary_node_flags(&self) -> &[bool] {
        &self.boundary_node_flags
    }
    pub fn element_diameters(&self) -> &[f64] {
        &self.element_diameters
    }
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }
    /// Edge ids of each triangle, local edge `i` joining vertices `i, i+1`.
    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }
    pub fn boundary_edge_flags(&self) -> &[bool] {
        &self.boundary_edge_flags
    }
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices_of(&self, k: usize) -> [Point; 3] {
        self.triangles[k].map(|v| self.nodes[v])
    }

    pub fn area(&self, k: usize) -> f64 {
        let [a, b, c] = self.vertices_of(k);
        signed_area(a, b, c)
    }

    pub fn max_diameter(&self) -> f64 {
        self.element_diameters.iter().cloned().fold(0.0, f64::max)
    }

    /// Index of the node at `x`, if one lies within `tol`.
    pub fn find_node(&self, x: Point, tol: f64) -> Option<usize> {
        let (k, _) = self.locate_point(x).ok()?;
        self.triangles[k].iter().copied().find(|&v| dist(self.nodes[v], x) <= tol).or_else(|| {
            self.nodes.iter().position(|&p| dist(p, x) <= tol)
        })
    }

    /// Triangles having node `v` as a vertex.
    pub fn triangles_around(&self, v: usize) -> Vec<usize> {
        self.triangles.iter().enumerate().filter(|(_, t)| t.contains(&v)).map(|(k, _)| k).collect()
    }

    /// Locates `x`, returning the containing triangle and barycentric
    /// coordinates (nonnegative, summing to one).
    pub fn locate_point(&self, x: Point) -> Result<(usize, [f64; 3])> {
        self.grid.locate(&self.nodes, &self.triangles, x, self.domain.diameter()).ok_or_else(|| {
            PfError::NotFound(format!("point ({}, {}) lies outside the mesh", x[0], x[1]))
        })
    }

    /// Same mesh with nodes renumbered: new node `perm[i]` is old node `i`.
    pub fn renumber_nodes(&self, perm: &[usize]) -> Result<TriMesh> {
        if perm.len() != self.n_nodes() {
            return Err(invalid("permutation length must equal the node count"));
        }
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(invalid("not a permutation"));
            }
        }
        let mut nodes = vec![[0.0; 2]; self.n_nodes()];
        for (old, &new) in perm.iter().enumerate() {
            nodes[new] = self.nodes[old];
        }
        let triangles = self.triangles.iter().map(|t| t.map(|v| perm[v])).collect();
        TriMesh::new(self.domain.clone(), nodes, triangles)
    }

    /// Checks positive orientation and conformity: every edge is shared by
    /// at most two triangles, boundary edges lie on the domain boundary and
    /// no node sits inside another triangle's edge.
    pub fn check_invariants(&self) -> Result<()> {
        for k in 0..self.n_triangles() {
            if self.area(k) <= 0.0 {
                return Err(PfError::Internal(format!("triangle {k} lost its orientation")));
            }
        }
        let tol = 1e-12 * self.domain.diameter();
        for (e, &b) in self.edges.iter().zip(&self.boundary_edge_flags) {
            if b {
                let m = midpoint(self.nodes[e[0]], self.nodes[e[1]]);
                if self.domain.distance_to_boundary(m) > tol {
                    return Err(PfError::Internal(format!("edge {e:?} is a hanging interior edge")));
                }
            }
        }
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            let (pa, pb) = (self.nodes[a], self.nodes[b]);
            for (v, &p) in self.nodes.iter().enumerate() {
                if v != a && v != b && point_segment_distance(p, pa, pb) <= tol {
                    return Err(PfError::Internal(format!("node {v} hangs on edge {e}")));
                }
            }
        }
        Ok(())
    }

    /// Legacy ASCII VTK unstructured grid with triangle cells.
    pub fn write_vtk(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_vtk_geometry(&mut out, "pointflow mesh")?;
        out.flush()?;
        Ok(())
    }

    pub(crate) fn write_vtk_geometry(&self, out: &mut impl Write, title: &str) -> Result<()> {
        writeln!(out, "# vtk DataFile Version 3.0")?;
        writeln!(out, "{title}")?;
        writeln!(out, "ASCII")?;
        writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(out, "POINTS {} double", self.n_nodes())?;
        for p in &self.nodes {
            writeln!(out, "{:.17e} {:.17e} 0", p[0], p[1])?;
        }
        writeln!(out, "CELLS {} {}", self.n_triangles(), 4 * self.n_triangles())?;
        for t in &self.triangles {
            writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(out, "CELL_TYPES {}", self.n_triangles())?;
        for _ in &self.triangles {
            writeln!(out, "5")?;
        }
        Ok(())
    }
}

/// Structured mesh of the unit square: `n × n` cells, each split along its
/// diagonal into two triangles, giving `(n+1)²` nodes and `2n²` triangles.
pub fn build_unit_square_mesh(n: usize) -> Result<TriMesh> {
    if n < 2 {
        return Err(invalid(format!("unit square mesh needs n >= 2, got {n}")));
    }
    let h = 1.0 / n as f64;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            nodes.push([i as f64 * h, j as f64 * h]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriMesh::new(PolygonDomain::unit_square(), nodes, triangles)
}

pub(crate) fn edge_key(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

pub(crate) fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}
