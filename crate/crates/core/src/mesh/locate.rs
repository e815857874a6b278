use crate::Point;

/// Uniform bucket grid over the bounding box; each bucket lists the
/// triangles whose bounding boxes overlap it.
#[derive(Debug, Clone)]
pub(super) struct BucketGrid {
    origin: Point,
    cell: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl BucketGrid {
    pub(super) fn new(nodes: &[Point], triangles: &[[usize; 3]]) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in nodes {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        if nodes.is_empty() {
            lo = [0.0; 2];
            hi = [1.0; 2];
        }
        let side = ((triangles.len() as f64).sqrt().ceil() as usize).clamp(1, 512);
        let dims = [side, side];
        let cell = [
            ((hi[0] - lo[0]) / side as f64).max(f64::MIN_POSITIVE),
            ((hi[1] - lo[1]) / side as f64).max(f64::MIN_POSITIVE),
        ];
        let mut grid = BucketGrid { origin: lo, cell, dims, buckets: vec![Vec::new(); side * side] };
        for (k, t) in triangles.iter().enumerate() {
            let mut tlo = [f64::INFINITY; 2];
            let mut thi = [f64::NEG_INFINITY; 2];
            for &v in t {
                for d in 0..2 {
                    tlo[d] = tlo[d].min(nodes[v][d]);
                    thi[d] = thi[d].max(nodes[v][d]);
                }
            }
            let [i0, j0] = grid.cell_of(tlo);
            let [i1, j1] = grid.cell_of(thi);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    grid.buckets[j * dims[0] + i].push(k);
                }
            }
        }
        grid
    }

    fn cell_of(&self, x: Point) -> [usize; 2] {
        let mut c = [0; 2];
        for d in 0..2 {
            let s = ((x[d] - self.origin[d]) / self.cell[d]).floor();
            c[d] = if s < 0.0 { 0 } else { (s as usize).min(self.dims[d] - 1) };
        }
        c
    }

    pub(super) fn locate(
        &self,
        nodes: &[Point],
        triangles: &[[usize; 3]],
        x: Point,
        scale: f64,
    ) -> Option<(usize, [f64; 3])> {
        let tol = 1e-10;
        let slack = tol * scale;
        for d in 0..2 {
            let lo = self.origin[d];
            let hi = self.origin[d] + self.cell[d] * self.dims[d] as f64;
            if x[d] < lo - slack || x[d] > hi + slack {
                return None;
            }
        }
        let [i, j] = self.cell_of(x);
        // Best candidate = largest minimal barycentric coordinate.
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &k in &self.buckets[j * self.dims[0] + i] {
            let lam = barycentric(nodes, triangles[k], x);
            let m = lam[0].min(lam[1]).min(lam[2]);
            if best.as_ref().is_none_or(|b| m > b.2) {
                best = Some((k, lam, m));
            }
        }
        let (k, lam, m) = best?;
        if m < -tol {
            return None;
        }
        let mut lam = lam.map(|l| l.max(0.0));
        let s: f64 = lam.iter().sum();
        for l in &mut lam {
            *l /= s;
        }
        Some((k, lam))
    }
}

pub(crate) fn barycentric(nodes: &[Point], t: [usize; 3], x: Point) -> [f64; 3] {
    let [a, b, c] = t.map(|v| nodes[v]);
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (x[1] - a[1]) * (c[0] - a[0])) / det;
    let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0])) / det;
    [1.0 - l1 - l2, l1, l2]
}
