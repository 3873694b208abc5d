//! Reference initial data, run configuration, the experiment driver and
//! CSV/VTK export.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use crate::assembly::Discretization;
use crate::diagnostics::{LedgerEntry, StepDiagnostics};
use crate::fem::edge_field_at;
use crate::mesh::{build_uniform_cube_mesh, Aabb, Mesh};
use crate::solver::{SolverOptions, DEFAULT_TOL};
use crate::timestepper::{init_state, steps_for, Backend, SchemeParams, SimState, Stepper};
use crate::vec3::{self, Vec3};
use crate::{Error, Result};

/// Vortex-like initial magnetization in the unit cube: pointing up at the
/// axis `x₁ = x₂ = 1/2`, down outside the cylinder of radius 1/2.
pub fn initial_m0(x: Vec3) -> Vec3 {
    let xs = [x[0] - 0.5, x[1] - 0.5, 0.0];
    let r2 = vec3::norm_sq(xs);
    if r2 >= 0.25 {
        return [0.0, 0.0, -1.0];
    }
    let a = (1.0 - 2.0 * r2.sqrt()).powi(4) / 4.0;
    let den = a * a + r2;
    [2.0 * xs[0] * a / den, 2.0 * xs[1] * a / den, (a * a - r2) / den]
}

/// Applied field `(0, 0, hs)` minus the magnetization inside `d_box`.
pub fn initial_h0(x: Vec3, hs: f64, d_box: Aabb) -> Vec3 {
    let applied = [0.0, 0.0, hs];
    if d_box.contains(x) {
        vec3::sub(applied, initial_m0(x))
    } else {
        applied
    }
}

/// Parameters of one run, read from a flat `key = value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    /// Grid cells per axis of the cavity.
    pub n_per_axis: usize,
    pub d_box: Aabb,
    pub cavity_box: Aabb,
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu0: f64,
    pub sigma: f64,
    pub theta: f64,
    pub k: f64,
    pub t_final: f64,
    /// Applied field strength along z.
    pub hs: f64,
    pub out_dir: PathBuf,
    /// Write a VTK snapshot every this many steps; 0 disables snapshots.
    pub snapshot_every: usize,
    pub solver_tol: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let p = SchemeParams::default();
        SimulationConfig {
            n_per_axis: 8,
            d_box: Aabb::unit(),
            cavity_box: Aabb::unit(),
            lambda1: p.lambda1,
            lambda2: p.lambda2,
            mu0: p.mu0,
            sigma: p.sigma,
            theta: p.theta,
            k: p.k,
            t_final: p.t_final,
            hs: 0.0,
            out_dir: PathBuf::from("out"),
            snapshot_every: 100,
            solver_tol: DEFAULT_TOL,
        }
    }
}

fn parse_box(value: &str) -> Result<Aabb> {
    let v: Vec<f64> = value
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("bad box '{value}': {e}")))?;
    if v.len() != 6 {
        return Err(Error::Config(format!("box needs 6 numbers, got '{value}'")));
    }
    Ok(Aabb::new([v[0], v[1], v[2]], [v[3], v[4], v[5]]))
}

fn format_box(b: &Aabb) -> String {
    format!("{},{},{},{},{},{}", b.min[0], b.min[1], b.min[2], b.max[0], b.max[1], b.max[2])
}

impl SimulationConfig {
    /// Parses `key = value` lines; `#` starts a comment. Unset keys keep
    /// their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SimulationConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            value
                .parse()
                .map_err(|e| Error::Config(format!("bad value '{value}' for {key}: {e}")))
        }
        match key {
            "n" => self.n_per_axis = num(key, value)?,
            "d_box" => self.d_box = parse_box(value)?,
            "cavity_box" => self.cavity_box = parse_box(value)?,
            "lambda1" => self.lambda1 = num(key, value)?,
            "lambda2" => self.lambda2 = num(key, value)?,
            "mu0" => self.mu0 = num(key, value)?,
            "sigma" => self.sigma = num(key, value)?,
            "theta" => self.theta = num(key, value)?,
            "k" => self.k = num(key, value)?,
            "T" => self.t_final = num(key, value)?,
            "hs" => self.hs = num(key, value)?,
            "out" => self.out_dir = PathBuf::from(value),
            "snapshot_every" => self.snapshot_every = num(key, value)?,
            "solver_tol" => self.solver_tol = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Renders the configuration in the format accepted by [`parse`](Self::parse).
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n = {}", self.n_per_axis);
        let _ = writeln!(s, "d_box = {}", format_box(&self.d_box));
        let _ = writeln!(s, "cavity_box = {}", format_box(&self.cavity_box));
        for (k, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("mu0", self.mu0),
            ("sigma", self.sigma),
            ("theta", self.theta),
            ("k", self.k),
            ("T", self.t_final),
            ("hs", self.hs),
        ] {
            let _ = writeln!(s, "{k} = {v:e}");
        }
        let _ = writeln!(s, "out = {}", self.out_dir.display());
        let _ = writeln!(s, "snapshot_every = {}", self.snapshot_every);
        let _ = writeln!(s, "solver_tol = {:e}", self.solver_tol);
        s
    }

    pub fn params(&self) -> SchemeParams {
        SchemeParams {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            mu0: self.mu0,
            sigma: self.sigma,
            theta: self.theta,
            k: self.k,
            t_final: self.t_final,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_per_axis == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if !self.d_box.is_valid() || !self.cavity_box.is_valid() {
            return Err(Error::Config("boxes need min < max on every axis".into()));
        }
        let inside = (0..3).all(|i| self.d_box.min[i] >= self.cavity_box.min[i] && self.d_box.max[i] <= self.cavity_box.max[i]);
        if !inside {
            return Err(Error::Config("ferromagnet box must lie inside the cavity".into()));
        }
        if !(self.solver_tol > 0.0 && self.solver_tol <= 1e-4) {
            return Err(Error::Config(format!("solver_tol {} outside (0, 1e-4]", self.solver_tol)));
        }
        self.params().validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn steps(&self) -> usize {
        steps_for(self.t_final, self.k)
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        let mesh = build_uniform_cube_mesh(self.n_per_axis, self.cavity_box)?;
        if self.d_box == self.cavity_box {
            Ok(mesh)
        } else {
            mesh.restrict_to_ferromagnet(self.d_box)
        }
    }

    /// Mesh, stepper and initial state for this configuration.
    pub fn setup(&self) -> Result<(Stepper, SimState)> {
        self.validate()?;
        let disc = Arc::new(Discretization::new(Arc::new(self.build_mesh()?)));
        let params = self.params();
        let d_box = self.d_box;
        let hs = self.hs;
        let state = init_state(initial_m0, |x| initial_h0(x, hs, d_box), &disc, &params)?;
        let stepper = Stepper::new(disc, params, Backend::Sparse(SolverOptions::with_tol(self.solver_tol)))?;
        Ok((stepper, state))
    }
}

/// One line of `timeseries.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeseriesRow {
    pub step: usize,
    pub t: f64,
    pub grad_m: f64,
    pub h_l2: f64,
    pub curl_h: f64,
    pub energy: f64,
    pub ledger_lhs: f64,
    pub ledger_ok: bool,
}

impl TimeseriesRow {
    pub fn new(diag: &StepDiagnostics, entry: &LedgerEntry) -> Self {
        TimeseriesRow {
            step: diag.step,
            t: diag.t,
            grad_m: diag.norms.grad_m,
            h_l2: diag.norms.h_l2,
            curl_h: diag.norms.curl_h,
            energy: diag.energy,
            ledger_lhs: entry.lhs,
            ledger_ok: entry.ok,
        }
    }
}

pub const CSV_HEADER: [&str; 8] = ["step", "t", "grad_m", "h_l2", "curl_h", "energy", "ledger_lhs", "ledger_ok"];

/// Streaming writer for `timeseries.csv`.
pub struct CsvSink {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl CsvSink {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut writer = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        writer.write_record(CSV_HEADER).map_err(|e| csv_error(&path, e))?;
        Ok(CsvSink { path, writer })
    }

    pub fn write(&mut self, row: &TimeseriesRow) -> Result<()> {
        let f = |v: f64| format!("{v:.16e}");
        self.writer
            .write_record([
                row.step.to_string(),
                f(row.t),
                f(row.grad_m),
                f(row.h_l2),
                f(row.curl_h),
                f(row.energy),
                f(row.ledger_lhs),
                row.ledger_ok.to_string(),
            ])
            .map_err(|e| csv_error(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    }
}

pub fn export_csv(rows: &[TimeseriesRow], path: impl AsRef<Path>) -> Result<()> {
    let mut sink = CsvSink::create(path)?;
    for r in rows {
        sink.write(r)?;
    }
    sink.finish()
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<TimeseriesRow>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| csv_error(path, e)))
        .collect()
}

fn write_vtk_geometry(w: &mut impl Write, mesh: &Mesh, title: &str) -> std::io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.n_vertices())?;
    for p in mesh.vertices() {
        writeln!(w, "{:.17e} {:.17e} {:.17e}", p[0], p[1], p[2])?;
    }
    writeln!(w, "CELLS {} {}", mesh.n_tets(), 5 * mesh.n_tets())?;
    for t in mesh.tets() {
        writeln!(w, "4 {} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    writeln!(w, "CELL_TYPES {}", mesh.n_tets())?;
    for _ in 0..mesh.n_tets() {
        writeln!(w, "10")?;
    }
    Ok(())
}

fn with_writer(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Legacy ASCII VTK of a state: `m` as point vectors (zero outside the
/// ferromagnet) and `H` sampled at tet barycenters as cell vectors.
pub fn export_vtk(state: &SimState, mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    state.m.check_len(mesh)?;
    state.h.check_len(mesh)?;
    with_writer(path.as_ref(), |w| {
        write_vtk_geometry(w, mesh, &format!("magnetization and field, step {} t={:e}", state.j, state.t))?;
        writeln!(w, "POINT_DATA {}", mesh.n_vertices())?;
        writeln!(w, "VECTORS m double")?;
        for v in 0..mesh.n_vertices() {
            let m = mesh.ferro_index(v).map_or([0.0; 3], |i| state.m[i]);
            writeln!(w, "{:.17e} {:.17e} {:.17e}", m[0], m[1], m[2])?;
        }
        writeln!(w, "CELL_DATA {}", mesh.n_tets())?;
        writeln!(w, "VECTORS H double")?;
        for t in 0..mesh.n_tets() {
            let h = edge_field_at(&state.h, mesh, t, [0.25; 4]);
            writeln!(w, "{:.17e} {:.17e} {:.17e}", h[0], h[1], h[2])?;
        }
        Ok(())
    })
}

/// Legacy ASCII VTK of the mesh alone, with a cell flag marking the
/// ferromagnet.
pub fn export_mesh_vtk(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    with_writer(path.as_ref(), |w| {
        write_vtk_geometry(w, mesh, "tetrahedral mesh")?;
        writeln!(w, "CELL_DATA {}", mesh.n_tets())?;
        writeln!(w, "SCALARS ferromagnet int 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for t in 0..mesh.n_tets() {
            writeln!(w, "{}", u8::from(mesh.is_ferro(t)))?;
        }
        Ok(())
    })
}

/// Machine-readable record of a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub n_per_axis: usize,
    pub hs: f64,
    pub theta: f64,
    pub k: f64,
    pub t_final: f64,
    pub system_dim: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub min_energy: f64,
    pub max_energy: f64,
    pub initial_grad_m: f64,
    pub final_grad_m: f64,
    pub ledger_violations: Vec<usize>,
    pub max_unit_deviation: f64,
    pub max_tangency: f64,
    pub max_rate_excess: f64,
    pub min_denominator: f64,
    pub max_solver_residual: f64,
    pub total_solver_iterations: usize,
    pub snapshots: usize,
    pub elapsed_seconds: f64,
}

impl RunSummary {
    pub fn ledger_clean(&self) -> bool {
        self.ledger_violations.is_empty()
    }
}

/// Runs the configured experiment and writes `timeseries.csv`,
/// `snapshots/*.vtk` and `summary.json` below `out_dir`.
pub fn run_experiment(config: &SimulationConfig) -> Result<RunSummary> {
    let started = Instant::now();
    let (stepper, state) = config.setup()?;
    let steps = config.steps();
    let out = &config.out_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let snap_dir = out.join("snapshots");
    if config.snapshot_every > 0 {
        fs::create_dir_all(&snap_dir).map_err(|e| Error::io(&snap_dir, e))?;
    }
    let disc = stepper.discretization().clone();
    let mesh = disc.mesh();
    info!(
        "running {steps} steps on n={} ({} unknowns per step), Hs={}",
        config.n_per_axis,
        disc.system_dim(),
        config.hs
    );

    let mut csv = CsvSink::create(out.join("timeseries.csv"))?;
    let mut snapshots = 0;
    let outcome = stepper.run(state, steps, |s, diag, entry| {
        if diag.step > 0 {
            csv.write(&TimeseriesRow::new(diag, entry))?;
        }
        if config.snapshot_every > 0 && s.j % config.snapshot_every == 0 {
            export_vtk(s, mesh, snap_dir.join(format!("step_{:06}.vtk", s.j)))?;
            snapshots += 1;
        }
        if diag.step > 0 && diag.step % 100 == 0 {
            info!("step {} energy {:.6e} ledger {}", diag.step, diag.energy, if entry.ok { "ok" } else { "VIOLATED" });
        }
        Ok(())
    })?;
    csv.finish()?;

    let traj = &outcome.trajectory;
    let later = &traj[1..];
    let fold = |f: fn(&StepDiagnostics) -> f64, init: f64, op: fn(f64, f64) -> f64| later.iter().map(f).fold(init, op);
    let summary = RunSummary {
        steps,
        n_per_axis: config.n_per_axis,
        hs: config.hs,
        theta: config.theta,
        k: config.k,
        t_final: config.t_final,
        system_dim: disc.system_dim(),
        initial_energy: traj[0].energy,
        final_energy: traj[traj.len() - 1].energy,
        min_energy: traj.iter().map(|d| d.energy).fold(f64::INFINITY, f64::min),
        max_energy: traj.iter().map(|d| d.energy).fold(f64::NEG_INFINITY, f64::max),
        initial_grad_m: traj[0].norms.grad_m,
        final_grad_m: traj[traj.len() - 1].norms.grad_m,
        ledger_violations: outcome.ledger.iter().filter(|e| !e.ok).map(|e| e.step).collect(),
        max_unit_deviation: traj.iter().map(|d| d.unit_deviation).fold(0.0, f64::max),
        max_tangency: fold(|d| d.tangency, 0.0, f64::max),
        max_rate_excess: fold(|d| d.rate_excess, f64::NEG_INFINITY, f64::max),
        min_denominator: fold(|d| d.min_denominator, f64::INFINITY, f64::min),
        max_solver_residual: fold(|d| d.solver_residual, 0.0, f64::max),
        total_solver_iterations: later.iter().map(|d| d.solver_iterations).sum(),
        snapshots,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    };
    let path = out.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}
