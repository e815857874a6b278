//! Manufactured solutions and error norms for convergence studies.

use crate::fem::VelocityPressureField;
use crate::quadrature::TriangleRule;
use crate::Point;

fn g(s: f64) -> f64 {
    s * s * (1.0 - s) * (1.0 - s)
}
fn g1(s: f64) -> f64 {
    2.0 * s - 6.0 * s * s + 4.0 * s * s * s
}
fn g2(s: f64) -> f64 {
    2.0 - 12.0 * s + 12.0 * s * s
}
fn g3(s: f64) -> f64 {
    -12.0 + 24.0 * s
}

/// Divergence-free flow on the unit square from the stream function
/// `x²(1-x)² y²(1-y)²`, vanishing on the boundary, with pressure
/// `x - 1/2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ManufacturedFlow;

impl ManufacturedFlow {
    pub fn velocity(&self, p: Point) -> [f64; 2] {
        let [x, y] = p;
        [g(x) * g1(y), -g1(x) * g(y)]
    }

    /// `grad[c][d] = ∂_d u_c`.
    pub fn gradient(&self, p: Point) -> [[f64; 2]; 2] {
        let [x, y] = p;
        [[g1(x) * g1(y), g(x) * g2(y)], [-g2(x) * g(y), -g1(x) * g1(y)]]
    }

    pub fn pressure(&self, p: Point) -> f64 {
        p[0] - 0.5
    }

    fn laplacian(&self, p: Point) -> [f64; 2] {
        let [x, y] = p;
        [g2(x) * g1(y) + g(x) * g3(y), -g3(x) * g(y) - g1(x) * g2(y)]
    }

    /// Body force `-νΔu + ∇p`, plus `(u·∇)u` when `convective`.
    pub fn forcing(&self, nu: f64, convective: bool, p: Point) -> [f64; 2] {
        let lap = self.laplacian(p);
        let mut f = [-nu * lap[0] + 1.0, -nu * lap[1]];
        if convective {
            let u = self.velocity(p);
            let gr = self.gradient(p);
            f[0] += u[0] * gr[0][0] + u[1] * gr[0][1];
            f[1] += u[0] * gr[1][0] + u[1] * gr[1][1];
        }
        f
    }
}

/// `(‖u - u_h‖_{L²}, ‖∇(u - u_h)‖_{L²})` against an analytic velocity.
pub fn velocity_errors(
    field: &VelocityPressureField,
    exact: impl Fn(Point) -> [f64; 2],
    exact_grad: impl Fn(Point) -> [[f64; 2]; 2],
) -> (f64, f64) {
    let rule = TriangleRule::with_degree(10);
    let space = field.space();
    let l2 = space.integrate_velocity(&field.velocity, &rule, |_, x, v, _| {
        let e = exact(x);
        (v[0] - e[0]).powi(2) + (v[1] - e[1]).powi(2)
    });
    let h1 = space.integrate_velocity(&field.velocity, &rule, |_, x, _, gr| {
        let e = exact_grad(x);
        let mut s = 0.0;
        for c in 0..2 {
            for d in 0..2 {
                s += (gr[c][d] - e[c][d]).powi(2);
            }
        }
        s
    });
    (l2.sqrt(), h1.sqrt())
}

/// Observed orders `log(e_i/e_{i+1}) / log(h_i/h_{i+1})` between
/// consecutive levels.
pub fn observed_orders(h: &[f64], errors: &[f64]) -> Vec<f64> {
    h.windows(2).zip(errors.windows(2)).map(|(hh, ee)| (ee[0] / ee[1]).ln() / (hh[0] / hh[1]).ln()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manufactured_flow_is_divergence_free_and_matches_fd() {
        let f = ManufacturedFlow;
        for p in [[0.3, 0.6], [0.71, 0.12]] {
            let gr = f.gradient(p);
            assert!((gr[0][0] + gr[1][1]).abs() < 1e-15);
            let h = 1e-6;
            for d in 0..2 {
                let mut pp = p;
                let mut pm = p;
                pp[d] += h;
                pm[d] -= h;
                for c in 0..2 {
                    let fd = (f.velocity(pp)[c] - f.velocity(pm)[c]) / (2.0 * h);
                    assert!((fd - gr[c][d]).abs() < 1e-8);
                }
            }
            // Laplacian by second differences of the velocity.
            let h = 1e-4;
            let lap = f.laplacian(p);
            for c in 0..2 {
                let mut s = -4.0 * f.velocity(p)[c];
                for (dx, dy) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
                    s += f.velocity([p[0] + dx, p[1] + dy])[c];
                }
                assert!((s / (h * h) - lap[c]).abs() < 1e-5);
            }
        }
        assert_eq!(f.velocity([0.0, 0.4]), [0.0, 0.0]);
        assert_eq!(f.velocity([0.4, 1.0]), [0.0, 0.0]);
    }

    #[test]
    fn orders_of_exact_powers() {
        let o = observed_orders(&[0.1, 0.05], &[1e-2, 2.5e-3]);
        assert!((o[0] - 2.0).abs() < 1e-12);
    }
}
