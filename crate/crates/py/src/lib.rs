//! Python module `pointflow_py`.

use std::path::PathBuf;
use std::sync::Arc;

use pointflow::adjoint::Target;
use pointflow::cli::{self, RunError};
use pointflow::fem::{assemble_stokes, TaylorHoodSpace};
use pointflow::mesh::{build_unit_square_mesh, grade_toward_points};
use pointflow::optimizer::{
    assemble_reduced_hessian, check_ssc, quadratic_growth_probe, reduced_cost, reduced_gradient, vi_residual,
    BoxConstraints, ControlProblem, ControlVector, OptimizeOptions, SscOptions,
};
use pointflow::state::regularity_indicator;
use pointflow::weights::{eval_weight, weighted_seminorm, DiracSourceSet, MuckenhouptWeight, WeightPower};
use pointflow::{PfError, PolygonDomain};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: PfError) -> PyErr {
    match e {
        PfError::InvalidArgument(m) | PfError::Config(m) | PfError::Domain(m) => PyValueError::new_err(m),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Converged state at one control.
#[pyclass(frozen)]
pub struct State {
    #[pyo3(get)]
    velocity: Vec<f64>,
    #[pyo3(get)]
    pressure: Vec<f64>,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    h1_seminorm: f64,
    #[pyo3(get)]
    weighted_seminorm: f64,
    #[pyo3(get)]
    regularity_indicator: f64,
}

/// Point-force control problem on a graded unit-square mesh.
#[pyclass(frozen)]
pub struct Problem {
    inner: ControlProblem,
    weight: MuckenhouptWeight,
}

#[pymethods]
impl Problem {
    /// `target` is `None` (zero), a pair (constant field) or `"swirl"`.
    #[new]
    #[pyo3(signature = (n, points, nu, eta, lower, upper, alpha=1.5, grading_levels=2, target=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n: usize,
        points: Vec<[f64; 2]>,
        nu: f64,
        eta: f64,
        lower: f64,
        upper: f64,
        alpha: f64,
        grading_levels: usize,
        target: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<Self> {
        let target = match target {
            None => Target::zero(),
            Some(t) => {
                if let Ok(s) = t.extract::<String>() {
                    if s != "swirl" {
                        return Err(PyValueError::new_err(format!("unknown target preset {s:?}")));
                    }
                    Target::analytic(|x| {
                        let s = 16.0 * x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]);
                        [s * (x[1] - 0.5), -s * (x[0] - 0.5)]
                    })
                } else {
                    let v: [f64; 2] = t.extract()?;
                    Target::analytic(move |_| v)
                }
            }
        };
        let base = build_unit_square_mesh(n).map_err(to_py)?;
        let mesh = grade_toward_points(&base, &points, grading_levels, 0.5).map_err(to_py)?;
        let space = TaylorHoodSpace::new(Arc::new(mesh));
        let system = Arc::new(assemble_stokes(&space, nu).map_err(to_py)?);
        let sources = DiracSourceSet::new(points, &PolygonDomain::unit_square()).map_err(to_py)?;
        let weight = MuckenhouptWeight::new(alpha, sources.clone()).map_err(to_py)?;
        let bounds = BoxConstraints::uniform(sources.len(), lower, upper).map_err(to_py)?;
        let inner = ControlProblem::new(system, sources, target, eta, bounds).map_err(to_py)?;
        Ok(Problem { inner, weight })
    }

    #[getter]
    fn n_sources(&self) -> usize {
        self.inner.sources().len()
    }

    /// Copy of this problem tracking the state produced by `controls`.
    fn with_synthetic_target(&self, controls: Vec<[f64; 2]>) -> PyResult<Self> {
        let y = self.inner.state(&ControlVector::new(controls)).map_err(to_py)?.field;
        Ok(Problem { inner: self.inner.clone().with_target(Target::Discrete(y)), weight: self.weight.clone() })
    }

    fn state(&self, controls: Vec<[f64; 2]>) -> PyResult<State> {
        let s = self.inner.state(&ControlVector::new(controls)).map_err(to_py)?;
        Ok(State {
            iterations: s.residual_history.len(),
            h1_seminorm: s.field.velocity_h1_seminorm(),
            weighted_seminorm: weighted_seminorm(&s.field, &self.weight, WeightPower::Direct, 6).map_err(to_py)?,
            regularity_indicator: regularity_indicator(&s),
            velocity: s.field.velocity.clone(),
            pressure: s.field.pressure.clone(),
        })
    }

    fn cost(&self, controls: Vec<[f64; 2]>) -> PyResult<f64> {
        reduced_cost(&self.inner, &ControlVector::new(controls)).map_err(to_py)
    }

    fn gradient(&self, controls: Vec<[f64; 2]>) -> PyResult<Vec<[f64; 2]>> {
        Ok(reduced_gradient(&self.inner, &ControlVector::new(controls)).map_err(to_py)?.values().to_vec())
    }

    /// Reduced Hessian over the flat components `[u1x, u1y, u2x, ...]`.
    fn hessian(&self, controls: Vec<[f64; 2]>) -> PyResult<Vec<Vec<f64>>> {
        Ok(assemble_reduced_hessian(&self.inner, &ControlVector::new(controls)).map_err(to_py)?.rows())
    }

    #[pyo3(signature = (start, tol=1e-8, max_iters=200))]
    fn optimize<'py>(&self, py: Python<'py>, start: Vec<[f64; 2]>, tol: f64, max_iters: usize) -> PyResult<Bound<'py, PyDict>> {
        let opts = OptimizeOptions { tol, max_iters, ..Default::default() };
        let r = pointflow::optimizer::projected_gradient(&self.inner, &ControlVector::new(start), &opts).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("control", r.final_control.values().to_vec())?;
        d.set_item("gradient", r.final_gradient.values().to_vec())?;
        d.set_item("cost", r.final_cost())?;
        d.set_item("vi_residual", vi_residual(&r.final_control, &r.final_gradient, self.inner.bounds()))?;
        d.set_item("converged", r.converged)?;
        d.set_item("iterations", r.iterations)?;
        d.set_item("message", r.message)?;
        Ok(d)
    }

    #[pyo3(signature = (control, tau=1e-6, tol_active=1e-8))]
    fn check_ssc<'py>(&self, py: Python<'py>, control: Vec<[f64; 2]>, tau: f64, tol_active: f64) -> PyResult<Bound<'py, PyDict>> {
        let opts = SscOptions { tau, tol_active, ..Default::default() };
        let r = check_ssc(&self.inner, &ControlVector::new(control), &opts).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("kappa", r.kappa)?;
        d.set_item("ssc_holds", r.ssc_holds)?;
        d.set_item("necessary_min", r.necessary_min)?;
        d.set_item("necessary_holds", r.necessary_holds)?;
        d.set_item("hessian", r.hessian.rows())?;
        d.set_item("strongly_active", r.strongly_active)?;
        Ok(d)
    }

    /// Fitted growth constant `μ` around `control`.
    #[pyo3(signature = (control, radius=1e-2, samples=50, seed=0))]
    fn growth_probe(&self, control: Vec<[f64; 2]>, radius: f64, samples: usize, seed: u64) -> PyResult<f64> {
        Ok(quadratic_growth_probe(&self.inner, &ControlVector::new(control), radius, samples, seed).map_err(to_py)?.mu)
    }
}

/// Distance weight `ρ(x)` for the given sources.
#[pyfunction]
fn weight(alpha: f64, points: Vec<[f64; 2]>, x: [f64; 2]) -> PyResult<f64> {
    let sources = DiracSourceSet::new(points, &PolygonDomain::unit_square()).map_err(to_py)?;
    let w = MuckenhouptWeight::new(alpha, sources).map_err(to_py)?;
    Ok(eval_weight(&w, x))
}

/// Runs a JSON experiment config; returns the files written.
#[pyfunction]
#[pyo3(signature = (config, out=None, seed=None))]
fn run_config(config: PathBuf, out: Option<PathBuf>, seed: Option<u64>) -> PyResult<Vec<String>> {
    match cli::run_file(&config, out.as_deref(), seed, false) {
        Ok(s) => Ok(s.files),
        Err(e @ RunError::Config(_)) => Err(PyValueError::new_err(e.to_string())),
        Err(e) => Err(PyRuntimeError::new_err(e.to_string())),
    }
}

#[pymodule]
pub fn pointflow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_class::<State>()?;
    m.add_function(wrap_pyfunction!(weight, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
