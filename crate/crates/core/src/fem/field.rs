use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use super::space::{p2_eval_bary, TaylorHoodSpace};
use crate::error::{invalid, Result};
use crate::quadrature::TriangleRule;
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRole {
    State,
    Adjoint,
    Sensitivity,
    SecondSensitivity,
    /// Interpolants and other fields not produced by a solve.
    Data,
}

/// Discrete velocity/pressure pair on a Taylor-Hood space.
#[derive(Debug, Clone)]
pub struct VelocityPressureField {
    space: Arc<TaylorHoodSpace>,
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    pub role: FieldRole,
}

impl VelocityPressureField {
    pub fn new(space: Arc<TaylorHoodSpace>, velocity: Vec<f64>, pressure: Vec<f64>, role: FieldRole) -> Result<Self> {
        if velocity.len() != space.n_u() || pressure.len() != space.n_p() {
            return Err(invalid("coefficient vector lengths do not match the space"));
        }
        Ok(VelocityPressureField { space, velocity, pressure, role })
    }

    pub fn zeros(space: Arc<TaylorHoodSpace>, role: FieldRole) -> Self {
        let (nu, np) = (space.n_u(), space.n_p());
        VelocityPressureField { space, velocity: vec![0.0; nu], pressure: vec![0.0; np], role }
    }

    /// Nodal interpolant of a velocity function (pressure zero). Boundary
    /// coefficients take the function values, so the result only satisfies
    /// the no-slip condition when `f` does.
    pub fn interpolate(space: Arc<TaylorHoodSpace>, f: impl Fn(Point) -> [f64; 2]) -> Self {
        let mut velocity = vec![0.0; space.n_u()];
        for (s, p) in space.scalar_dof_points().into_iter().enumerate() {
            let v = f(p);
            velocity[2 * s] = v[0];
            velocity[2 * s + 1] = v[1];
        }
        let np = space.n_p();
        VelocityPressureField { space, velocity, pressure: vec![0.0; np], role: FieldRole::Data }
    }

    /// Sets the pressure to the P1 interpolant of `p`.
    pub fn with_pressure(mut self, p: impl Fn(Point) -> f64) -> Self {
        self.pressure = self.space.mesh().nodes().iter().map(|&x| p(x)).collect();
        self
    }

    pub fn space(&self) -> &Arc<TaylorHoodSpace> {
        &self.space
    }

    pub fn same_space(&self, other: &VelocityPressureField) -> bool {
        Arc::ptr_eq(&self.space, &other.space)
    }

    /// Exact evaluation of the quadratic velocity at `x`.
    pub fn evaluate_velocity_at(&self, x: Point) -> Result<[f64; 2]> {
        let (k, lam) = self.space.mesh().locate_point(x)?;
        let ev = p2_eval_bary(self.space.geometry(k), lam);
        Ok(self.space.combine(&self.velocity, k, &ev).0)
    }

    pub fn pressure_at(&self, x: Point) -> Result<f64> {
        let (k, lam) = self.space.mesh().locate_point(x)?;
        let t = self.space.mesh().triangles()[k];
        Ok((0..3).map(|i| lam[i] * self.pressure[t[i]]).sum())
    }

    /// `‖u‖_{L²}` by quadrature of degree 6.
    pub fn velocity_l2_norm(&self) -> f64 {
        let rule = TriangleRule::with_degree(6);
        self.space.integrate_velocity(&self.velocity, &rule, |_, _, v, _| v[0] * v[0] + v[1] * v[1]).sqrt()
    }

    /// `‖∇u‖_{L²}` by quadrature of degree 4 (exact for P2).
    pub fn velocity_h1_seminorm(&self) -> f64 {
        let rule = TriangleRule::with_degree(4);
        self.space
            .integrate_velocity(&self.velocity, &rule, |_, _, _, g| g[0][0].powi(2) + g[0][1].powi(2) + g[1][0].powi(2) + g[1][1].powi(2))
            .sqrt()
    }

    /// `∫ p` (exact for P1).
    pub fn pressure_mean_integral(&self) -> f64 {
        let mesh = self.space.mesh();
        (0..mesh.n_triangles())
            .map(|k| {
                let t = mesh.triangles()[k];
                mesh.area(k) * (self.pressure[t[0]] + self.pressure[t[1]] + self.pressure[t[2]]) / 3.0
            })
            .sum()
    }

    pub fn max_boundary_velocity(&self) -> f64 {
        self.space.boundary_dofs().iter().map(|&d| self.velocity[d].abs()).fold(0.0, f64::max)
    }

    /// Legacy ASCII VTK with the velocity at mesh nodes as point vectors and
    /// the pressure as point scalars.
    pub fn write_vtk(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let mesh = self.space.mesh();
        mesh.write_vtk_geometry(&mut out, &format!("pointflow {:?} field", self.role))?;
        writeln!(out, "POINT_DATA {}", mesh.n_nodes())?;
        writeln!(out, "VECTORS velocity double")?;
        for v in 0..mesh.n_nodes() {
            writeln!(out, "{:.17e} {:.17e} 0", self.velocity[2 * v], self.velocity[2 * v + 1])?;
        }
        writeln!(out, "SCALARS pressure double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for p in &self.pressure {
            writeln!(out, "{p:.17e}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut f = self.clone();
        f.velocity.iter_mut().for_each(|v| *v *= s);
        f.pressure.iter_mut().for_each(|v| *v *= s);
        f
    }

    /// `self - other`, keeping the role of `self`.
    pub fn difference(&self, other: &VelocityPressureField) -> Self {
        let mut f = self.clone();
        f.velocity.iter_mut().zip(&other.velocity).for_each(|(a, b)| *a -= b);
        f.pressure.iter_mut().zip(&other.pressure).for_each(|(a, b)| *a -= b);
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_unit_square_mesh;

    fn space(n: usize) -> Arc<TaylorHoodSpace> {
        TaylorHoodSpace::new(Arc::new(build_unit_square_mesh(n).unwrap()))
    }

    #[test]
    fn reproduces_linears_and_quadratics() {
        let s = space(4);
        let lin = VelocityPressureField::interpolate(s.clone(), |x| x);
        let v = lin.evaluate_velocity_at([0.3, 0.7]).unwrap();
        assert!((v[0] - 0.3).abs() < 1e-14 && (v[1] - 0.7).abs() < 1e-14);
        let quad = VelocityPressureField::interpolate(s.clone(), |x| [x[0] * x[0], 0.0]);
        let v = quad.evaluate_velocity_at([0.5, 0.5]).unwrap();
        assert!((v[0] - 0.25).abs() < 1e-14 && v[1].abs() < 1e-14);
        let v = quad.evaluate_velocity_at([0.37, 0.81]).unwrap();
        assert!((v[0] - 0.37 * 0.37).abs() < 1e-14);
    }

    #[test]
    fn vertex_evaluation_returns_stored_dof() {
        let s = space(3);
        let f = VelocityPressureField::interpolate(s.clone(), |x| [x[0].sin(), x[1].exp()]);
        for (v, &p) in s.mesh().nodes().iter().enumerate() {
            let val = f.evaluate_velocity_at(p).unwrap();
            assert_eq!(val, [f.velocity[2 * v], f.velocity[2 * v + 1]]);
        }
    }

    #[test]
    fn outside_evaluation_fails() {
        let f = VelocityPressureField::zeros(space(2), FieldRole::State);
        assert!(f.evaluate_velocity_at([1.5, 0.5]).is_err());
    }

    #[test]
    fn norms_of_known_fields() {
        let s = space(4);
        let f = VelocityPressureField::interpolate(s.clone(), |x| [x[1] * x[1], 0.0]);
        // ∫ (2 x₂)² = 4/3
        assert!((f.velocity_h1_seminorm().powi(2) - 4.0 / 3.0).abs() < 1e-12);
        // ∫ x₂⁴ = 1/5
        assert!((f.velocity_l2_norm().powi(2) - 0.2).abs() < 1e-12);
        let g = f.with_pressure(|x| x[0] - 0.5);
        assert!(g.pressure_mean_integral().abs() < 1e-15);
    }

    #[test]
    fn vtk_field_export() {
        let f = VelocityPressureField::interpolate(space(2), |x| x);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.vtk");
        f.write_vtk(&p).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert!(text.contains("VECTORS velocity double"));
        assert!(text.contains("SCALARS pressure double 1"));
    }
}
