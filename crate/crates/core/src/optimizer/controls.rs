use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Amplitudes `u_t ∈ ℝ²`, one per source point, in source order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlVector {
    values: Vec<[f64; 2]>,
}

impl ControlVector {
    pub fn new(values: Vec<[f64; 2]>) -> Self {
        ControlVector { values }
    }

    pub fn zeros(len: usize) -> Self {
        ControlVector { values: vec![[0.0; 2]; len] }
    }

    /// From `[u_1x, u_1y, u_2x, ...]`.
    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if !flat.len().is_multiple_of(2) {
            return Err(invalid("flat control vector must have even length"));
        }
        Ok(ControlVector { values: flat.chunks(2).map(|c| [c[0], c[1]]).collect() })
    }

    pub fn flat(&self) -> Vec<f64> {
        self.values.iter().flat_map(|v| v.iter().copied()).collect()
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// `self + s d`.
    pub fn axpy(&self, s: f64, d: &[[f64; 2]]) -> ControlVector {
        ControlVector { values: self.values.iter().zip(d).map(|(u, d)| [u[0] + s * d[0], u[1] + s * d[1]]).collect() }
    }

    pub fn sub(&self, other: &ControlVector) -> ControlVector {
        self.axpy(-1.0, other.values())
    }

    pub fn dot(&self, other: &ControlVector) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a[0] * b[0] + a[1] * b[1]).sum()
    }
}

/// Reduced gradient `Ψ_t ∈ ℝ²` per source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientVector {
    values: Vec<[f64; 2]>,
}

impl GradientVector {
    pub fn new(values: Vec<[f64; 2]>) -> Self {
        GradientVector { values }
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn flat(&self) -> Vec<f64> {
        self.values.iter().flat_map(|v| v.iter().copied()).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dot(&self, d: &ControlVector) -> f64 {
        self.values.iter().zip(d.values()).map(|(a, b)| a[0] * b[0] + a[1] * b[1]).sum()
    }

    pub fn sub(&self, other: &GradientVector) -> ControlVector {
        ControlVector::new(self.values.iter().zip(&other.values).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect())
    }
}

/// Componentwise bounds `a_t ≤ u_t ≤ b_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxConstraints {
    lower: Vec<[f64; 2]>,
    upper: Vec<[f64; 2]>,
}

/// Relative distance to a bound below which a component counts as active.
pub const ACTIVE_REL_TOL: f64 = 1e-10;

impl BoxConstraints {
    pub fn new(lower: Vec<[f64; 2]>, upper: Vec<[f64; 2]>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(invalid("lower and upper bounds differ in length"));
        }
        for (a, b) in lower.iter().zip(&upper) {
            for c in 0..2 {
                if !(a[c] < b[c]) {
                    return Err(invalid(format!("lower bound {} must be below upper bound {}", a[c], b[c])));
                }
            }
        }
        Ok(BoxConstraints { lower, upper })
    }

    /// The same box `[a, b]²` for each of `len` sources.
    pub fn uniform(len: usize, a: f64, b: f64) -> Result<Self> {
        BoxConstraints::new(vec![[a, a]; len], vec![[b, b]; len])
    }

    pub fn lower(&self) -> &[[f64; 2]] {
        &self.lower
    }

    pub fn upper(&self) -> &[[f64; 2]] {
        &self.upper
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn contains(&self, u: &ControlVector) -> bool {
        u.len() == self.len()
            && u.values().iter().enumerate().all(|(t, v)| (0..2).all(|c| self.lower[t][c] <= v[c] && v[c] <= self.upper[t][c]))
    }

    /// `(lower, upper)` of flat component `i`.
    pub fn bounds_of(&self, i: usize) -> (f64, f64) {
        (self.lower[i / 2][i % 2], self.upper[i / 2][i % 2])
    }

    /// Activity of flat component `i` at value `v`.
    pub fn status(&self, i: usize, v: f64) -> ComponentStatus {
        let (a, b) = self.bounds_of(i);
        let tol = ACTIVE_REL_TOL * (b - a);
        if v - a <= tol {
            ComponentStatus::LowerActive
        } else if b - v <= tol {
            ComponentStatus::UpperActive
        } else {
            ComponentStatus::Inactive
        }
    }
}

/// Componentwise clamp onto the box.
pub fn project_box(v: &ControlVector, bounds: &BoxConstraints) -> ControlVector {
    ControlVector::new(
        v.values()
            .iter()
            .enumerate()
            .map(|(t, x)| {
                [x[0].clamp(bounds.lower[t][0], bounds.upper[t][0]), x[1].clamp(bounds.lower[t][1], bounds.upper[t][1])]
            })
            .collect(),
    )
}

/// `‖U - P(U - Ψ)‖`, zero exactly at stationary points.
pub fn vi_residual(u: &ControlVector, psi: &GradientVector, bounds: &BoxConstraints) -> f64 {
    let p = project_box(&u.axpy(-1.0, psi.values()), bounds);
    u.sub(&p).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComponentStatus {
    LowerActive,
    UpperActive,
    Inactive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub status: Vec<ComponentStatus>,
    /// Flat indices whose gradient sign contradicts their status.
    pub violations: Vec<usize>,
}

impl KktReport {
    pub fn compliant(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Classifies every scalar component and checks the sign of `Ψ`: `≥ 0` at
/// a lower bound, `≤ 0` at an upper bound, `= 0` in between, each to `tol`.
pub fn kkt_sign_report(u: &ControlVector, psi: &GradientVector, bounds: &BoxConstraints, tol: f64) -> KktReport {
    let uf = u.flat();
    let pf = psi.flat();
    let mut status = Vec::with_capacity(uf.len());
    let mut violations = Vec::new();
    for (i, (&v, &g)) in uf.iter().zip(&pf).enumerate() {
        let s = bounds.status(i, v);
        let ok = match s {
            ComponentStatus::LowerActive => g >= -tol,
            ComponentStatus::UpperActive => g <= tol,
            ComponentStatus::Inactive => g.abs() <= tol,
        };
        if !ok {
            violations.push(i);
        }
        status.push(s);
    }
    KktReport { status, violations }
}
