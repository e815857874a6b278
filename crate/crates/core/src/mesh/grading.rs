//! Local refinement toward point sources by longest-edge bisection.

use std::collections::HashMap;

use super::locate::barycentric;
use super::{dist, edge_key, TriMesh};
use crate::error::{invalid, PfError, Result};
use crate::Point;

/// Inserts each point as a mesh node and refines the elements around it.
///
/// Points closer than `1e-12 × diam(Ω)` to an existing node are snapped onto
/// it (the node is moved onto the point). Otherwise the point is inserted by
/// splitting the edge it lies on, or the triangle containing it into three.
/// At level `k` every triangle incident to the point is refined until its
/// diameter is at most `ratio^k` times the initial local diameter. Bisection
/// is always along the longest edge with conforming closure.
pub fn grade_toward_points(mesh: &TriMesh, points: &[Point], levels: usize, ratio: f64) -> Result<TriMesh> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(invalid(format!("grading ratio must lie in (0,1), got {ratio}")));
    }
    for p in points {
        if !mesh.domain().contains_strictly(*p) {
            return Err(PfError::Domain(format!("point ({}, {}) is not inside the domain", p[0], p[1])));
        }
    }
    let mut work = Work::from_mesh(mesh);
    let tol = 1e-12 * mesh.domain().diameter();
    let anchors: Vec<usize> = points.iter().map(|&p| work.insert_point(p, tol)).collect::<Result<_>>()?;
    let initial: Vec<f64> = anchors.iter().map(|&v| work.local_diameter(v)).collect();
    let mut target_scale = 1.0;
    for _ in 0..levels {
        target_scale *= ratio;
        for (&v, &h0) in anchors.iter().zip(&initial) {
            let target = target_scale * h0;
            while let Some(k) = work.first_incident_larger_than(v, target) {
                work.refine(k);
            }
        }
    }
    TriMesh::new(mesh.domain().clone(), work.nodes, work.tris)
}

struct Work {
    nodes: Vec<Point>,
    tris: Vec<[usize; 3]>,
    edge_tris: HashMap<[usize; 2], Vec<usize>>,
}

impl Work {
    fn from_mesh(mesh: &TriMesh) -> Self {
        let mut w = Work { nodes: mesh.nodes().to_vec(), tris: mesh.triangles().to_vec(), edge_tris: HashMap::new() };
        for k in 0..w.tris.len() {
            w.attach(k);
        }
        w
    }

    fn attach(&mut self, k: usize) {
        let t = self.tris[k];
        for i in 0..3 {
            self.edge_tris.entry(edge_key(t[i], t[(i + 1) % 3])).or_default().push(k);
        }
    }

    fn detach(&mut self, k: usize) {
        let t = self.tris[k];
        for i in 0..3 {
            let key = edge_key(t[i], t[(i + 1) % 3]);
            if let Some(list) = self.edge_tris.get_mut(&key) {
                list.retain(|&x| x != k);
                if list.is_empty() {
                    self.edge_tris.remove(&key);
                }
            }
        }
    }

    fn set_triangle(&mut self, k: usize, t: [usize; 3]) {
        self.detach(k);
        self.tris[k] = t;
        self.attach(k);
    }

    fn push_triangle(&mut self, t: [usize; 3]) {
        self.tris.push(t);
        self.attach(self.tris.len() - 1);
    }

    fn edge_len(&self, key: [usize; 2]) -> f64 {
        dist(self.nodes[key[0]], self.nodes[key[1]])
    }

    /// Longest edge under the global order (length, endpoint key).
    fn longest_edge(&self, k: usize) -> [usize; 2] {
        let t = self.tris[k];
        let mut best = edge_key(t[0], t[1]);
        for i in 1..3 {
            let key = edge_key(t[i], t[(i + 1) % 3]);
            let (lb, lk) = (self.edge_len(best), self.edge_len(key));
            if lk > lb || (lk == lb && key > best) {
                best = key;
            }
        }
        best
    }

    fn diameter(&self, k: usize) -> f64 {
        self.edge_len(self.longest_edge(k))
    }

    fn local_diameter(&self, v: usize) -> f64 {
        (0..self.tris.len()).filter(|&k| self.tris[k].contains(&v)).map(|k| self.diameter(k)).fold(0.0, f64::max)
    }

    fn first_incident_larger_than(&self, v: usize, h: f64) -> Option<usize> {
        (0..self.tris.len()).find(|&k| self.tris[k].contains(&v) && self.diameter(k) > h)
    }

    fn neighbor(&self, k: usize, key: [usize; 2]) -> Option<usize> {
        self.edge_tris.get(&key).and_then(|l| l.iter().copied().find(|&x| x != k))
    }

    /// Conforming longest-edge bisection of triangle `k`.
    fn refine(&mut self, k: usize) {
        let mut stack = vec![k];
        while let Some(&top) = stack.last() {
            let e = self.longest_edge(top);
            match self.neighbor(top, e) {
                Some(n) if self.longest_edge(n) != e => stack.push(n),
                _ => {
                    let a = self.nodes[e[0]];
                    let b = self.nodes[e[1]];
                    self.split_edge(e, [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
                    stack.pop();
                }
            }
        }
    }

    /// Splits every triangle sharing `key` at the new node `p` on that edge.
    fn split_edge(&mut self, key: [usize; 2], p: Point) -> usize {
        self.nodes.push(p);
        let m = self.nodes.len() - 1;
        let owners = self.edge_tris.get(&key).cloned().unwrap_or_default();
        for k in owners {
            let t = self.tris[k];
            let i = (0..3).find(|&i| edge_key(t[i], t[(i + 1) % 3]) == key).expect("edge owner");
            let (a, b, c) = (t[i], t[(i + 1) % 3], t[(i + 2) % 3]);
            self.set_triangle(k, [a, m, c]);
            self.push_triangle([m, b, c]);
        }
        m
    }

    fn insert_point(&mut self, p: Point, tol: f64) -> Result<usize> {
        let mut best: Option<(usize, [f64; 3])> = None;
        for k in 0..self.tris.len() {
            let lam = barycentric(&self.nodes, self.tris[k], p);
            let m = lam[0].min(lam[1]).min(lam[2]);
            if best.as_ref().is_none_or(|(_, l)| m > l[0].min(l[1]).min(l[2])) {
                best = Some((k, lam));
            }
        }
        let (k, lam) = best.ok_or_else(|| PfError::NotFound("empty mesh".into()))?;
        let t = self.tris[k];
        if let Some(&v) = t.iter().find(|&&v| dist(self.nodes[v], p) <= tol) {
            self.nodes[v] = p;
            return Ok(v);
        }
        let scale = self.diameter(k);
        let (imin, lmin) = lam.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &l)| if l < acc.1 { (i, l) } else { acc });
        if lmin < -1e-12 {
            return Err(PfError::NotFound(format!("point ({}, {}) lies outside the mesh", p[0], p[1])));
        }
        // Distance of p to the edge opposite vertex imin.
        let (a, b) = (t[(imin + 1) % 3], t[(imin + 2) % 3]);
        if super::point_segment_distance(p, self.nodes[a], self.nodes[b]) <= 1e-12 * scale {
            return Ok(self.split_edge(edge_key(a, b), p));
        }
        self.nodes.push(p);
        let m = self.nodes.len() - 1;
        let [a, b, c] = t;
        self.set_triangle(k, [a, b, m]);
        self.push_triangle([b, c, m]);
        self.push_triangle([c, a, m]);
        Ok(m)
    }
}
