//! Batch front end: JSON experiment configs in, CSV tables, VTK fields and
//! a run manifest out.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adjoint::Target;
use crate::error::PfError;
use crate::fem::{assemble_stokes, FieldRole, TaylorHoodSpace, VelocityPressureField};
use crate::mesh::{build_unit_square_mesh, grade_toward_points, PolygonDomain};
use crate::optimizer::{
    assemble_reduced_hessian, check_ssc, kkt_sign_report, project_box, projected_gradient, quadratic_growth_probe,
    reduced_cost, reduced_gradient, BoxConstraints, ComponentStatus, ControlProblem, ControlVector, OptimizeOptions,
    SscOptions,
};
use crate::state::{regularity_indicator, StateSolveOptions};
use crate::weights::{lp_seminorm, weighted_seminorm, DiracSourceSet, MuckenhouptWeight, WeightPower};
use crate::Point;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID_CONFIG: i32 = 2;
pub const EXIT_SOLVER_FAILURE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "pointflow", version, about = "Point-force control of steady Navier-Stokes flow")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// RNG seed (overrides `seed` in the config).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        verbose: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Solve,
    Optimize,
    GradientCheck,
    HessianCheck,
    Ssc,
    RegularityStudy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    /// Cells per side of the unit square.
    pub n: usize,
    #[serde(default = "default_levels")]
    pub grading_levels: usize,
    #[serde(default = "default_ratio")]
    pub grading_ratio: f64,
}

fn default_levels() -> usize {
    2
}

fn default_ratio() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    pub nu: f64,
    pub eta: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub point: Point,
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    /// Control used by `solve`, the checks, and as optimizer start.
    #[serde(default)]
    pub control: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetConfig {
    Zero,
    Constant { value: [f64; 2] },
    /// Solid-body rotation damped to zero on the boundary.
    Swirl { amplitude: f64 },
    /// `(A x₂(1-x₂), 0)`.
    Shear { amplitude: f64 },
    /// The discrete state produced by the given controls.
    State { controls: Vec<[f64; 2]> },
    /// JSON file `{"velocity": [...]}` with coefficients on the run's mesh.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "d_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "d_newton_max")]
    pub newton_max_iters: usize,
    #[serde(default = "d_opt_tol")]
    pub opt_tol: f64,
    #[serde(default = "d_opt_max")]
    pub opt_max_iters: usize,
    #[serde(default = "d_fd_step")]
    pub fd_step: f64,
    #[serde(default = "d_tau")]
    pub tau: f64,
    #[serde(default = "d_tol_active")]
    pub tol_active: f64,
    #[serde(default = "d_sigma")]
    pub growth_radius: f64,
    #[serde(default = "d_samples")]
    pub growth_samples: usize,
}

fn d_newton_tol() -> f64 {
    1e-10
}
fn d_newton_max() -> usize {
    30
}
fn d_opt_tol() -> f64 {
    1e-8
}
fn d_opt_max() -> usize {
    200
}
fn d_fd_step() -> f64 {
    1e-4
}
fn d_tau() -> f64 {
    1e-6
}
fn d_tol_active() -> f64 {
    1e-8
}
fn d_sigma() -> f64 {
    1e-2
}
fn d_samples() -> usize {
    50
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            newton_tol: d_newton_tol(),
            newton_max_iters: d_newton_max(),
            opt_tol: d_opt_tol(),
            opt_max_iters: d_opt_max(),
            fd_step: d_fd_step(),
            tau: d_tau(),
            tol_active: d_tol_active(),
            growth_radius: d_sigma(),
            growth_samples: d_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub mesh: MeshConfig,
    pub physics: PhysicsConfig,
    pub sources: Vec<SourceConfig>,
    #[serde(default = "default_target")]
    pub target: TargetConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Mesh sizes for `regularity-study`.
    #[serde(default)]
    pub ladder: Vec<usize>,
    /// Exponent of the `L^p` seminorm column, in (1, 2).
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub write_vtk: bool,
}

fn default_target() -> TargetConfig {
    TargetConfig::Zero
}

fn default_p() -> f64 {
    1.5
}

/// Failure of a run, mapped to an exit status.
#[derive(Debug)]
pub enum RunError {
    Config(String),
    Solver(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_INVALID_CONFIG,
            RunError::Solver(_) => EXIT_SOLVER_FAILURE,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "invalid config: {m}"),
            RunError::Solver(m) => write!(f, "solver failure: {m}"),
        }
    }
}

impl From<PfError> for RunError {
    fn from(e: PfError) -> Self {
        match e {
            PfError::Config(m) => RunError::Config(m),
            other => RunError::Solver(other.to_string()),
        }
    }
}

fn config_err(field: &str, msg: impl std::fmt::Display) -> RunError {
    RunError::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.mesh.n < 2 {
            return Err(config_err("mesh.n", "must be at least 2"));
        }
        if !(self.mesh.grading_ratio > 0.0 && self.mesh.grading_ratio < 1.0) {
            return Err(config_err("mesh.grading_ratio", "must lie in (0,1)"));
        }
        if !(self.physics.alpha > 0.0 && self.physics.alpha < 2.0) {
            return Err(config_err("physics.alpha", "alpha must lie in (0,2)"));
        }
        if !(self.physics.nu > 0.0) || !self.physics.nu.is_finite() {
            return Err(config_err("physics.nu", "nu must be positive"));
        }
        if !(self.physics.eta > 0.0) || !self.physics.eta.is_finite() {
            return Err(config_err("physics.eta", "eta must be positive"));
        }
        if self.sources.is_empty() {
            return Err(config_err("sources", "at least one source is required"));
        }
        for (i, s) in self.sources.iter().enumerate() {
            for c in 0..2 {
                if !(s.lower[c] < s.upper[c]) {
                    return Err(config_err(&format!("sources[{i}].lower"), "lower bound must be below upper bound"));
                }
            }
        }
        let points: Vec<Point> = self.sources.iter().map(|s| s.point).collect();
        DiracSourceSet::new(points, &PolygonDomain::unit_square()).map_err(|e| config_err("sources", e))?;
        if !(self.p > 1.0 && self.p < 2.0) {
            return Err(config_err("p", "p must lie in (1,2)"));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.newton_tol", t.newton_tol),
            ("tolerances.opt_tol", t.opt_tol),
            ("tolerances.fd_step", t.fd_step),
            ("tolerances.tau", t.tau),
            ("tolerances.tol_active", t.tol_active),
            ("tolerances.growth_radius", t.growth_radius),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(config_err(name, "must be positive"));
            }
        }
        if self.mode == Mode::RegularityStudy {
            if self.ladder.is_empty() {
                return Err(config_err("ladder", "regularity-study needs at least one mesh size"));
            }
            if self.ladder.iter().any(|&n| n < 2) {
                return Err(config_err("ladder", "mesh sizes must be at least 2"));
            }
        }
        if let TargetConfig::State { controls } = &self.target {
            if controls.len() != self.sources.len() {
                return Err(config_err("target.controls", "one control pair per source is required"));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    fn points(&self) -> Vec<Point> {
        self.sources.iter().map(|s| s.point).collect()
    }

    fn controls(&self) -> ControlVector {
        ControlVector::new(self.sources.iter().map(|s| s.control).collect())
    }

    fn bounds(&self) -> Result<BoxConstraints, RunError> {
        BoxConstraints::new(self.sources.iter().map(|s| s.lower).collect(), self.sources.iter().map(|s| s.upper).collect())
            .map_err(|e| config_err("sources", e))
    }

    fn state_options(&self) -> StateSolveOptions {
        StateSolveOptions {
            newton_tol: self.tolerances.newton_tol,
            newton_max_iters: self.tolerances.newton_max_iters,
            ..Default::default()
        }
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

struct Setup {
    space: Arc<TaylorHoodSpace>,
    problem: ControlProblem,
    weight: MuckenhouptWeight,
}

fn setup(cfg: &ExperimentConfig, n: usize) -> Result<Setup, RunError> {
    let points = cfg.points();
    let base = build_unit_square_mesh(n)?;
    let mesh = grade_toward_points(&base, &points, cfg.mesh.grading_levels, cfg.mesh.grading_ratio)?;
    let space = TaylorHoodSpace::new(Arc::new(mesh));
    let system = Arc::new(assemble_stokes(&space, cfg.physics.nu)?);
    let sources = DiracSourceSet::new(points, &PolygonDomain::unit_square())?;
    let weight = MuckenhouptWeight::new(cfg.physics.alpha, sources.clone()).map_err(|e| config_err("physics.alpha", e))?;
    let problem = ControlProblem::new(system, sources, Target::zero(), cfg.physics.eta, cfg.bounds()?)?
        .with_state_options(cfg.state_options());
    let target = match &cfg.target {
        TargetConfig::Zero => Target::zero(),
        TargetConfig::Constant { value } => {
            let v = *value;
            Target::analytic(move |_| v)
        }
        TargetConfig::Swirl { amplitude } => {
            let a = *amplitude;
            Target::analytic(move |x| {
                let s = 16.0 * a * x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]);
                [s * (x[1] - 0.5), -s * (x[0] - 0.5)]
            })
        }
        TargetConfig::Shear { amplitude } => {
            let a = *amplitude;
            Target::analytic(move |x| [a * x[1] * (1.0 - x[1]), 0.0])
        }
        TargetConfig::State { controls } => Target::Discrete(problem.state(&ControlVector::new(controls.clone()))?.field),
        TargetConfig::File { path } => {
            #[derive(Deserialize)]
            struct FieldFile {
                velocity: Vec<f64>,
            }
            let text = fs::read_to_string(path).map_err(|e| config_err("target.path", e))?;
            let f: FieldFile = serde_json::from_str(&text).map_err(|e| config_err("target.path", e))?;
            let np = space.n_p();
            let field = VelocityPressureField::new(space.clone(), f.velocity, vec![0.0; np], FieldRole::Data)
                .map_err(|e| config_err("target.path", e))?;
            Target::Discrete(field)
        }
    };
    Ok(Setup { space, problem: problem.with_target(target), weight })
}

/// Files written by a run, relative to the output directory.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub files: Vec<String>,
    pub config_hash: String,
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), RunError> {
        fs::write(self.dir.join(name), contents).map_err(|e| RunError::Solver(format!("cannot write {name}: {e}")))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn vtk(&mut self, name: &str, field: &VelocityPressureField) -> Result<(), RunError> {
        field.write_vtk(&self.dir.join(name))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Reads a config file, applies overrides and runs it.
pub fn run_file(path: &Path, out: Option<&Path>, seed: Option<u64>, verbose: bool) -> Result<RunSummary, RunError> {
    let text = fs::read_to_string(path).map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.output_dir = Some(o.to_path_buf());
    }
    run(&cfg, verbose)
}

/// Worker cap from `PF_THREADS` (default 1). Every stage runs on one
/// thread, which satisfies any cap.
pub fn thread_cap() -> Result<usize, RunError> {
    match std::env::var("PF_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(config_err("PF_THREADS", "must be a positive integer")),
        },
    }
}

pub fn run(cfg: &ExperimentConfig, verbose: bool) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    let threads = thread_cap()?;
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("pointflow-out"));
    fs::create_dir_all(&dir).map_err(|e| RunError::Solver(format!("cannot create {}: {e}", dir.display())))?;
    let mut out = Output { dir: dir.clone(), files: Vec::new() };
    let log = |msg: &str| {
        if verbose {
            eprintln!("[pointflow] {msg}");
        }
    };
    log(&format!("mode {:?}, worker cap {threads}", cfg.mode));
    match cfg.mode {
        Mode::Solve => run_solve(cfg, &mut out, &log)?,
        Mode::Optimize => run_optimize(cfg, &mut out, &log)?,
        Mode::GradientCheck => run_gradient_check(cfg, &mut out)?,
        Mode::HessianCheck => run_hessian_check(cfg, &mut out)?,
        Mode::Ssc => run_ssc(cfg, &mut out, &log)?,
        Mode::RegularityStudy => run_regularity(cfg, &mut out, &log)?,
    }
    let hash = cfg.content_hash();
    let manifest = serde_json::json!({
        "tool": "pointflow",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "config_hash": hash,
        "outputs": out.files,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    out.write("manifest.json", &(text + "\n"))?;
    Ok(RunSummary { output_dir: dir, files: out.files, config_hash: hash })
}

fn run_solve(cfg: &ExperimentConfig, out: &mut Output, log: &dyn Fn(&str)) -> Result<(), RunError> {
    let s = setup(cfg, cfg.mesh.n)?;
    let u = cfg.controls();
    let state = s.problem.state(&u)?;
    log(&format!("state converged after {} iterations", state.residual_history.len()));
    let cost = reduced_cost(&s.problem, &u)?;
    let mut t = Table::new(&[
        "n_nodes",
        "n_velocity_dofs",
        "n_pressure_dofs",
        "iterations",
        "final_residual",
        "cost",
        "h1_seminorm",
        "weighted_seminorm",
        "regularity_indicator",
    ]);
    t.push(vec![
        s.space.mesh().n_nodes().to_string(),
        s.space.n_u().to_string(),
        s.space.n_p().to_string(),
        state.residual_history.len().to_string(),
        fmt_f64(state.final_residual()),
        fmt_f64(cost),
        fmt_f64(state.field.velocity_h1_seminorm()),
        fmt_f64(weighted_seminorm(&state.field, &s.weight, WeightPower::Direct, 6)?),
        fmt_f64(regularity_indicator(&state)),
    ]);
    out.write("solve.csv", &t.render())?;
    if cfg.write_vtk {
        out.vtk("state.vtk", &state.field)?;
    }
    Ok(())
}

fn optimize(cfg: &ExperimentConfig, s: &Setup, out: &mut Output, log: &dyn Fn(&str)) -> Result<ControlVector, RunError> {
    let u0 = project_box(&cfg.controls(), s.problem.bounds());
    let opts = OptimizeOptions { tol: cfg.tolerances.opt_tol, max_iters: cfg.tolerances.opt_max_iters, ..Default::default() };
    let report = projected_gradient(&s.problem, &u0, &opts)?;
    log(&format!("optimizer: {} after {} iterations", report.message, report.iterations));
    let ncomp = 2 * cfg.sources.len();
    let mut header = vec!["iteration".to_string(), "cost".into(), "vi_residual".into(), "step".into()];
    header.extend((0..ncomp).map(|i| format!("u{}_{}", i / 2, if i % 2 == 0 { "x" } else { "y" })));
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut t = Table::new(&header_refs);
    for (k, it) in report.iterates.iter().enumerate() {
        let mut row = vec![k.to_string(), fmt_f64(it.cost), fmt_f64(it.vi_residual), fmt_f64(it.step)];
        row.extend(it.control.flat().into_iter().map(fmt_f64));
        t.push(row);
    }
    out.write("optimize.csv", &t.render())?;
    let kkt = kkt_sign_report(&report.final_control, &report.final_gradient, s.problem.bounds(), 1e-8);
    let mut k = Table::new(&["component", "status", "control", "gradient", "violation"]);
    let uf = report.final_control.flat();
    let gf = report.final_gradient.flat();
    for i in 0..ncomp {
        let status = match kkt.status[i] {
            ComponentStatus::LowerActive => "lower-active",
            ComponentStatus::UpperActive => "upper-active",
            ComponentStatus::Inactive => "inactive",
        };
        k.push(vec![i.to_string(), status.into(), fmt_f64(uf[i]), fmt_f64(gf[i]), kkt.violations.contains(&i).to_string()]);
    }
    out.write("kkt.csv", &k.render())?;
    if !report.converged {
        return Err(RunError::Solver(format!("optimizer did not converge: {}", report.message)));
    }
    if cfg.write_vtk {
        let eval = s.problem.evaluate(&report.final_control)?;
        out.vtk("state.vtk", &eval.state.field)?;
        out.vtk("adjoint.vtk", &eval.adjoint.field)?;
    }
    Ok(report.final_control)
}

fn run_optimize(cfg: &ExperimentConfig, out: &mut Output, log: &dyn Fn(&str)) -> Result<(), RunError> {
    let s = setup(cfg, cfg.mesh.n)?;
    optimize(cfg, &s, out, log).map(|_| ())
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn run_gradient_check(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), RunError> {
    let s = setup(cfg, cfg.mesh.n)?;
    let u = cfg.controls();
    let g = reduced_gradient(&s.problem, &u)?.flat();
    let h = cfg.tolerances.fd_step;
    let mut t = Table::new(&["component", "adjoint", "finite_difference", "relative_error"]);
    for i in 0..g.len() {
        let mut e = vec![0.0; g.len()];
        e[i] = h;
        let e = ControlVector::from_flat(&e)?;
        let jp = reduced_cost(&s.problem, &u.axpy(1.0, e.values()))?;
        let jm = reduced_cost(&s.problem, &u.axpy(-1.0, e.values()))?;
        let fd = (jp - jm) / (2.0 * h);
        t.push(vec![i.to_string(), fmt_f64(g[i]), fmt_f64(fd), fmt_f64(rel_err(g[i], fd))]);
    }
    out.write("gradient_check.csv", &t.render())
}

fn run_hessian_check(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), RunError> {
    let s = setup(cfg, cfg.mesh.n)?;
    let u = cfg.controls();
    let hess = assemble_reduced_hessian(&s.problem, &u)?;
    let h = cfg.tolerances.fd_step;
    let n = hess.dim();
    let mut t = Table::new(&["row", "col", "hessian", "finite_difference", "relative_error"]);
    let mut columns = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = h;
        let e = ControlVector::from_flat(&e)?;
        let gp = reduced_gradient(&s.problem, &u.axpy(1.0, e.values()))?.flat();
        let gm = reduced_gradient(&s.problem, &u.axpy(-1.0, e.values()))?.flat();
        columns.push(gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>());
    }
    for i in 0..n {
        for (j, col) in columns.iter().enumerate() {
            t.push(vec![i.to_string(), j.to_string(), fmt_f64(hess.get(i, j)), fmt_f64(col[i]), fmt_f64(rel_err(hess.get(i, j), col[i]))]);
        }
    }
    out.write("hessian_check.csv", &t.render())
}

fn run_ssc(cfg: &ExperimentConfig, out: &mut Output, log: &dyn Fn(&str)) -> Result<(), RunError> {
    let s = setup(cfg, cfg.mesh.n)?;
    let u = optimize(cfg, &s, out, log)?;
    let opts = SscOptions {
        tau: cfg.tolerances.tau,
        tol_active: cfg.tolerances.tol_active,
        stationarity_tol: cfg.tolerances.opt_tol,
        ..Default::default()
    };
    let r = check_ssc(&s.problem, &u, &opts)?;
    let (mu, violations) = if r.ssc_holds {
        let g = quadratic_growth_probe(&s.problem, &u, cfg.tolerances.growth_radius, cfg.tolerances.growth_samples, cfg.seed)?;
        (g.mu, g.violations.len())
    } else {
        (f64::NAN, 0)
    };
    log(&format!("ssc holds: {}, kappa {:e}", r.ssc_holds, r.kappa));
    let mut t = Table::new(&[
        "kappa",
        "ssc_holds",
        "necessary_min",
        "necessary_holds",
        "tau",
        "hessian_min_eigenvalue",
        "growth_mu",
        "growth_violations",
    ]);
    let ev = r.hessian.eigenvalues()?;
    t.push(vec![
        fmt_f64(r.kappa),
        r.ssc_holds.to_string(),
        fmt_f64(r.necessary_min),
        r.necessary_holds.to_string(),
        fmt_f64(r.tau),
        fmt_f64(ev[0]),
        fmt_f64(mu),
        violations.to_string(),
    ]);
    out.write("ssc.csv", &t.render())?;
    let mut c = Table::new(&["component", "gradient", "strongly_active", "strict_cone", "tau_cone"]);
    let gf = r.gradient.flat();
    for i in 0..gf.len() {
        c.push(vec![
            i.to_string(),
            fmt_f64(gf[i]),
            r.strongly_active[i].to_string(),
            format!("{:?}", r.cone.strict[i]).to_lowercase(),
            format!("{:?}", r.cone.tau[i]).to_lowercase(),
        ]);
    }
    out.write("cone.csv", &c.render())
}

fn run_regularity(cfg: &ExperimentConfig, out: &mut Output, log: &dyn Fn(&str)) -> Result<(), RunError> {
    let mut t = Table::new(&["n", "n_nodes", "h1_seminorm", "weighted_seminorm", "lp_seminorm", "regularity_indicator"]);
    for &n in &cfg.ladder {
        let s = setup(cfg, n)?;
        let state = s.problem.state(&cfg.controls())?;
        log(&format!("n = {n}: {} nodes", s.space.mesh().n_nodes()));
        t.push(vec![
            n.to_string(),
            s.space.mesh().n_nodes().to_string(),
            fmt_f64(state.field.velocity_h1_seminorm()),
            fmt_f64(weighted_seminorm(&state.field, &s.weight, WeightPower::Direct, 6)?),
            fmt_f64(lp_seminorm(&state.field, cfg.p)?),
            fmt_f64(regularity_indicator(&state)),
        ]);
    }
    out.write("regularity.csv", &t.render())
}

/// Entry point shared by the binary and tests; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID_CONFIG } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run { config, out, seed, verbose } => match run_file(&config, out.as_deref(), seed, verbose) {
            Ok(summary) => {
                if verbose {
                    eprintln!("[pointflow] wrote {} files to {}", summary.files.len(), summary.output_dir.display());
                }
                EXIT_OK
            }
            Err(e) => {
                eprintln!("pointflow: {e}");
                e.exit_code()
            }
        },
    }
}
