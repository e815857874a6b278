use crate::error::{invalid, Result};
use crate::Point;

/// Simply connected polygon, vertices listed counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonDomain {
    vertices: Vec<Point>,
}

impl PolygonDomain {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(invalid("polygon needs at least three vertices"));
        }
        let domain = PolygonDomain { vertices };
        if domain.signed_area() <= 0.0 {
            return Err(invalid("polygon must be counter-clockwise with positive area"));
        }
        let n = domain.vertices.len();
        for i in 0..n {
            for j in (i + 1)..n {
                // adjacent edges share a vertex and are allowed to touch there
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a, b) = domain.edge(i);
                let (c, d) = domain.edge(j);
                if segments_intersect(a, b, c, d) {
                    return Err(invalid(format!("polygon edges {i} and {j} intersect")));
                }
            }
        }
        Ok(domain)
    }

    pub fn unit_square() -> Self {
        PolygonDomain { vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edge(&self, i: usize) -> (Point, Point) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        (0..self.vertices.len()).map(move |i| self.edge(i))
    }

    pub fn signed_area(&self) -> f64 {
        self.edges().map(|(a, b)| a[0] * b[1] - b[0] * a[1]).sum::<f64>() * 0.5
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.vertices {
            for b in &self.vertices {
                d = d.max(dist(*a, *b));
            }
        }
        d
    }

    /// Exact Euclidean distance from `x` to the polygon boundary.
    pub fn distance_to_boundary(&self, x: Point) -> f64 {
        self.edges().map(|(a, b)| point_segment_distance(x, a, b)).fold(f64::INFINITY, f64::min)
    }

    /// Even-odd test; points on the boundary count as outside.
    pub fn contains_strictly(&self, x: Point) -> bool {
        if self.distance_to_boundary(x) <= 1e-14 * self.diameter() {
            return false;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a[1] > x[1]) != (b[1] > x[1]) {
                let xi = a[0] + (x[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if x[0] < xi {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub(crate) fn point_segment_distance(x: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ax = [x[0] - a[0], x[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let s = if len2 > 0.0 { ((ax[0] * ab[0] + ax[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    dist(x, [a[0] + s * ab[0], a[1] + s * ab[1]])
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |p: Point, q: Point, r: Point| {
        orient(p, q, r) == 0.0
            && r[0] >= p[0].min(q[0])
            && r[0] <= p[0].max(q[0])
            && r[1] >= p[1].min(q[1])
            && r[1] <= p[1].max(q[1])
    };
    on(c, d, a) || on(c, d, b) || on(a, b, c) || on(a, b, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_clockwise_and_bowtie() {
        assert!(PolygonDomain::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).is_err());
        assert!(PolygonDomain::new(vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]).is_err());
        assert!(PolygonDomain::new(vec![[0.0, 0.0], [2.0, 0.0], [1.0, 1.0]]).is_ok());
    }

    #[test]
    fn square_distances() {
        let sq = PolygonDomain::unit_square();
        assert_eq!(sq.distance_to_boundary([0.5, 0.5]), 0.5);
        assert!((sq.distance_to_boundary([0.25, 0.6]) - 0.25).abs() < 1e-15);
        assert!(sq.contains_strictly([0.5, 0.5]));
        assert!(!sq.contains_strictly([1.0, 0.5]));
        assert!(!sq.contains_strictly([1.2, 0.5]));
        assert!((sq.diameter() - 2f64.sqrt()).abs() < 1e-15);
    }
}
