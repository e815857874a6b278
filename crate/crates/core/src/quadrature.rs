//! Gauss rules on the unit interval and on the reference triangle.
//!
//! Triangle rules are collapsed (Duffy) tensor products of Gauss-Legendre
//! rules. Every point lies strictly inside the triangle, so integrands that
//! are singular at a vertex are never sampled there.

use crate::Point;

/// Gauss-Legendre rule with `n` points mapped to `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "at least one Gauss point is required");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Newton on P_n starting from the Chebyshev-like guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature rule on the reference triangle `(0,0), (1,0), (0,1)`.
/// Weights sum to the reference area `1/2`.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    degree: usize,
}

impl TriangleRule {
    /// Rule exact for polynomials of total degree `degree`.
    pub fn with_degree(degree: usize) -> Self {
        let n = (degree + 3) / 2;
        let (x, w) = gauss_legendre_unit(n.max(1));
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (xu, wu) in x.iter().zip(&w) {
            for (xv, wv) in x.iter().zip(&w) {
                points.push([*xu, (1.0 - xu) * xv]);
                weights.push(wu * wv * (1.0 - xu));
            }
        }
        TriangleRule { points, weights, degree }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Composite rule: each reference triangle split into `k²` congruent
    /// subtriangles, each integrated with `self`. Used by oracles.
    pub fn refined(&self, k: usize) -> TriangleRule {
        let k = k.max(1);
        let h = 1.0 / k as f64;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut push = |a: Point, b: Point, c: Point| {
            for (p, w) in self.points.iter().zip(&self.weights) {
                let x = a[0] + (b[0] - a[0]) * p[0] + (c[0] - a[0]) * p[1];
                let y = a[1] + (b[1] - a[1]) * p[0] + (c[1] - a[1]) * p[1];
                points.push([x, y]);
                weights.push(w * h * h);
            }
        };
        for i in 0..k {
            for j in 0..(k - i) {
                let (x0, y0) = (i as f64 * h, j as f64 * h);
                push([x0, y0], [x0 + h, y0], [x0, y0 + h]);
                if i + j + 1 < k {
                    push([x0 + h, y0], [x0 + h, y0 + h], [x0, y0 + h]);
                }
            }
        }
        TriangleRule { points, weights, degree: self.degree }
    }
}
