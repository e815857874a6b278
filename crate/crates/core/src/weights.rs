//! Point-distance weights around the Dirac sources and the (weighted)
//! seminorms used by the diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, PfError, Result};
use crate::fem::VelocityPressureField;
use crate::mesh::dist;
use crate::mesh::PolygonDomain;
use crate::quadrature::TriangleRule;
use crate::Point;

/// Minimum quadrature degree on elements that have a Dirac point as vertex.
pub const DIRAC_ELEMENT_DEGREE: usize = 6;

/// Monte Carlo samples drawn inside every ball of the A₂ estimator.
const SAMPLES_PER_BALL: usize = 4000;

/// Ordered set of source points together with their separation `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiracSourceSet {
    points: Vec<Point>,
    separation: f64,
    domain: PolygonDomain,
}

impl DiracSourceSet {
    pub fn new(points: Vec<Point>, domain: &PolygonDomain) -> Result<Self> {
        let separation = compute_separation(&points, domain)?;
        Ok(DiracSourceSet { points, separation, domain: domain.clone() })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn separation(&self) -> f64 {
        self.separation
    }

    pub fn domain(&self) -> &PolygonDomain {
        &self.domain
    }
}

/// Smallest of the boundary distance and (for two or more points) the
/// pairwise distances.
pub fn compute_separation(points: &[Point], domain: &PolygonDomain) -> Result<f64> {
    if points.is_empty() {
        return Err(invalid("at least one source point is required"));
    }
    let mut d = f64::INFINITY;
    for (i, &p) in points.iter().enumerate() {
        if !p.iter().all(|c| c.is_finite()) || !domain.contains_strictly(p) {
            return Err(PfError::Domain(format!("source ({}, {}) is not strictly inside the domain", p[0], p[1])));
        }
        d = d.min(domain.distance_to_boundary(p));
        for &q in &points[..i] {
            let pq = dist(p, q);
            if pq == 0.0 {
                return Err(invalid(format!("source ({}, {}) is repeated", p[0], p[1])));
            }
            d = d.min(pq);
        }
    }
    Ok(d)
}

/// `ρ(x) = |x - t|^α` near each source `t`.
///
/// With a single source the power law holds on all of Ω. With several
/// sources it holds inside the ball of radius `d/2` around each of them
/// and `ρ = 1` elsewhere, so the weight jumps across those spheres.
#[derive(Debug, Clone, PartialEq)]
pub struct MuckenhouptWeight {
    alpha: f64,
    sources: DiracSourceSet,
}

impl MuckenhouptWeight {
    pub fn new(alpha: f64, sources: DiracSourceSet) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(invalid(format!("alpha must lie in (0,2), got {alpha}")));
        }
        Ok(MuckenhouptWeight { alpha, sources })
    }

    /// The constant weight `ρ ≡ 1` (exponent zero).
    pub fn unit(sources: DiracSourceSet) -> Self {
        MuckenhouptWeight { alpha: 0.0, sources }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sources(&self) -> &DiracSourceSet {
        &self.sources
    }

    pub fn eval(&self, x: Point) -> f64 {
        eval_weight(self, x)
    }

    pub fn eval_inverse(&self, x: Point) -> f64 {
        eval_weight_inverse(self, x)
    }
}

pub fn eval_weight(w: &MuckenhouptWeight, x: Point) -> f64 {
    if w.alpha == 0.0 {
        return 1.0;
    }
    let pts = w.sources.points();
    let d = pts.iter().map(|&t| dist(x, t)).fold(f64::INFINITY, f64::min);
    if pts.len() == 1 || d < 0.5 * w.sources.separation() {
        d.powf(w.alpha)
    } else {
        1.0
    }
}

/// `1/ρ(x)`; `+∞` at the sources.
pub fn eval_weight_inverse(w: &MuckenhouptWeight, x: Point) -> f64 {
    let r = eval_weight(w, x);
    if r == 0.0 {
        f64::INFINITY
    } else {
        1.0 / r
    }
}

/// Power of the weight inside the seminorm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightPower {
    /// `ρ`
    Direct,
    /// `ρ⁻¹`
    Inverse,
}

impl WeightPower {
    pub fn from_sign(sign: i32) -> Result<Self> {
        match sign {
            1 => Ok(WeightPower::Direct),
            -1 => Ok(WeightPower::Inverse),
            _ => Err(invalid(format!("weight sign must be +1 or -1, got {sign}"))),
        }
    }
}

/// `(∫ |∇v|² ρ^{±1})^{1/2}` by element quadrature of the given degree,
/// raised to at least [`DIRAC_ELEMENT_DEGREE`] on elements touching a
/// source.
pub fn weighted_seminorm(
    field: &VelocityPressureField,
    w: &MuckenhouptWeight,
    power: WeightPower,
    degree: usize,
) -> Result<f64> {
    let space = field.space();
    let mesh = space.mesh();
    let base = TriangleRule::with_degree(degree);
    let near = TriangleRule::with_degree(degree.max(DIRAC_ELEMENT_DEGREE));
    let tol = 1e-12 * mesh.domain().diameter();
    let mut total = 0.0;
    for k in 0..space.n_elements() {
        let verts = mesh.vertices_of(k);
        let touches = w.sources.points().iter().any(|&t| verts.iter().any(|&v| dist(v, t) <= tol));
        let rule = if touches { &near } else { &base };
        let geo = space.geometry(k);
        let mut local = 0.0;
        for (r, wt) in rule.points.iter().zip(&rule.weights) {
            let x = geo.map(*r);
            let rho = match power {
                WeightPower::Direct => eval_weight(w, x),
                WeightPower::Inverse => {
                    let inv = eval_weight_inverse(w, x);
                    if !inv.is_finite() {
                        return Err(PfError::Internal(format!(
                            "quadrature point ({}, {}) coincides with a source",
                            x[0], x[1]
                        )));
                    }
                    inv
                }
            };
            let (_, g) = space.velocity_in_element(&field.velocity, k, *r);
            local += wt * rho * (g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]);
        }
        total += 2.0 * geo.area * local;
    }
    Ok(total.sqrt())
}

/// `(∫ |∇v|^p)^{1/p}` with the Frobenius norm of the gradient, `p ∈ (1, 2)`.
pub fn lp_seminorm(field: &VelocityPressureField, p: f64) -> Result<f64> {
    if !(p > 1.0 && p < 2.0) {
        return Err(invalid(format!("p must lie in (1,2), got {p}")));
    }
    let rule = TriangleRule::with_degree(8);
    let total = field.space().integrate_velocity(&field.velocity, &rule, |_, _, _, g| {
        (g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]).powf(0.5 * p)
    });
    Ok(total.powf(1.0 / p))
}

/// Lower estimate of the A₂ characteristic restricted to balls inside Ω:
/// the largest `avg_B ρ · avg_B ρ⁻¹` over `sample_balls` random balls.
///
/// Ball `k` draws from its own stream of the seeded generator, so the
/// sample sets are nested in `sample_balls`. Even-numbered balls are
/// centred at a source; odd ones anywhere in Ω.
pub fn estimate_a2_characteristic(w: &MuckenhouptWeight, sample_balls: usize, seed: u64) -> Result<f64> {
    if sample_balls == 0 {
        return Err(invalid("at least one ball must be sampled"));
    }
    let domain = w.sources.domain();
    let (lo, hi) = bounding_box(domain.vertices());
    let mut best = 1.0_f64;
    for k in 0..sample_balls {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let pts = w.sources.points();
        let center = if k % 2 == 0 {
            pts[rng.random_range(0..pts.len())]
        } else {
            loop {
                let c = [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1])];
                if domain.contains_strictly(c) {
                    break c;
                }
            }
        };
        let radius = domain.distance_to_boundary(center) * rng.random_range(0.05..1.0);
        let (mut sum, mut sum_inv, mut count) = (0.0, 0.0, 0usize);
        while count < SAMPLES_PER_BALL {
            let r = radius * rng.random::<f64>().sqrt();
            let phi = std::f64::consts::TAU * rng.random::<f64>();
            let x = [center[0] + r * phi.cos(), center[1] + r * phi.sin()];
            let inv = eval_weight_inverse(w, x);
            if !inv.is_finite() {
                continue;
            }
            sum += eval_weight(w, x);
            sum_inv += inv;
            count += 1;
        }
        let n = count as f64;
        best = best.max((sum / n) * (sum_inv / n));
    }
    Ok(best)
}

fn bounding_box(vertices: &[Point]) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for v in vertices {
        for c in 0..2 {
            lo[c] = lo[c].min(v[c]);
            hi[c] = hi[c].max(v[c]);
        }
    }
    (lo, hi)
}
