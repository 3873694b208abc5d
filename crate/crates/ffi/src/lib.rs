//! C ABI for the `thetamag` solver.
//!
//! Simulations are opaque handles created by [`tm_simulation_new`] and
//! released by [`tm_simulation_free`]. Every fallible call returns a
//! [`TmStatus`]; on failure [`tm_last_error`] describes the cause for the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use thetamag::diagnostics::{EnergyLedger, LedgerEntry, StepDiagnostics};
use thetamag::experiment::{export_vtk, initial_m0, SimulationConfig};
use thetamag::timestepper::{SimState, Stepper};
use thetamag::Error;

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidMesh = 3,
    SolverFailure = 4,
    Io = 5,
    Config = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Run parameters; obtain defaults from [`tm_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TmConfig {
    pub n_per_axis: u32,
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu0: f64,
    pub sigma: f64,
    pub theta: f64,
    pub k: f64,
    pub t_final: f64,
    pub hs: f64,
    pub solver_tol: f64,
}

/// Monitored quantities of the current state.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TmDiagnostics {
    pub step: u64,
    pub t: f64,
    pub grad_m: f64,
    pub h_l2: f64,
    pub curl_h: f64,
    pub energy: f64,
    pub ledger_lhs: f64,
    /// 1 if the energy ledger holds at this step, 0 otherwise.
    pub ledger_ok: i32,
    pub unit_deviation: f64,
    pub solver_residual: f64,
}

/// Opaque simulation handle.
pub struct TmSimulation {
    stepper: Stepper,
    state: SimState,
    ledger: EnergyLedger,
    diag: StepDiagnostics,
    entry: LedgerEntry,
    violations: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> TmStatus {
    match e {
        Error::InvalidMesh(_) => TmStatus::InvalidMesh,
        Error::InvalidArgument(_) => TmStatus::InvalidArgument,
        Error::Config(_) => TmStatus::Config,
        Error::Solver { .. } => TmStatus::SolverFailure,
        Error::Step { source, .. } => status_of(source),
        Error::Io { .. } => TmStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), TmStatus>) -> TmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TmStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            TmStatus::Panic
        }
    }
}

fn fail(e: Error) -> TmStatus {
    set_error(&e.to_string());
    status_of(&e)
}

fn null(what: &str) -> TmStatus {
    set_error(&format!("{what} is null"));
    TmStatus::NullPointer
}

impl From<&SimulationConfig> for TmConfig {
    fn from(c: &SimulationConfig) -> Self {
        TmConfig {
            n_per_axis: c.n_per_axis as u32,
            lambda1: c.lambda1,
            lambda2: c.lambda2,
            mu0: c.mu0,
            sigma: c.sigma,
            theta: c.theta,
            k: c.k,
            t_final: c.t_final,
            hs: c.hs,
            solver_tol: c.solver_tol,
        }
    }
}

impl TmConfig {
    fn to_simulation(self) -> SimulationConfig {
        SimulationConfig {
            n_per_axis: self.n_per_axis as usize,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            mu0: self.mu0,
            sigma: self.sigma,
            theta: self.theta,
            k: self.k,
            t_final: self.t_final,
            hs: self.hs,
            solver_tol: self.solver_tol,
            ..SimulationConfig::default()
        }
    }
}

impl TmSimulation {
    fn create(cfg: &SimulationConfig) -> thetamag::Result<Self> {
        let (stepper, state) = cfg.setup()?;
        let diag = stepper.initial_diagnostics(&state);
        let mut ledger = EnergyLedger::new(stepper.params(), diag.energy);
        let entry = ledger.push(&diag);
        Ok(TmSimulation {
            stepper,
            state,
            ledger,
            diag,
            entry,
            violations: 0,
        })
    }

    fn advance(&mut self, steps: u64) -> thetamag::Result<()> {
        for _ in 0..steps {
            let (next, diag) = self.stepper.step(&self.state)?;
            self.entry = self.ledger.push(&diag);
            self.violations += u64::from(!self.entry.ok);
            self.diag = diag;
            self.state = next;
        }
        Ok(())
    }
}

/// Writes the reference configuration into `out`.
///
/// # Safety
/// `out` must be null or point to writable memory for one `TmConfig`.
#[no_mangle]
pub unsafe extern "C" fn tm_config_default(out: *mut TmConfig) -> TmStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = TmConfig::from(&SimulationConfig::default());
        Ok(())
    })
}

/// Creates a simulation on the unit cube from `config`.
///
/// # Safety
/// `config` must point to a valid `TmConfig` and `out` to writable storage
/// for one pointer.
#[no_mangle]
pub unsafe extern "C" fn tm_simulation_new(config: *const TmConfig, out: *mut *mut TmSimulation) -> TmStatus {
    guard(|| {
        let cfg = unsafe { config.as_ref() }.ok_or_else(|| null("config"))?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let sim = TmSimulation::create(&cfg.to_simulation()).map_err(fail)?;
        *out = Box::into_raw(Box::new(sim));
        Ok(())
    })
}

/// Creates a simulation from a `key = value` configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable storage for
/// one pointer.
#[no_mangle]
pub unsafe extern "C" fn tm_simulation_new_from_file(path: *const c_char, out: *mut *mut TmSimulation) -> TmStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let path = unsafe { CStr::from_ptr(path) }.to_string_lossy().into_owned();
        let cfg = SimulationConfig::from_file(PathBuf::from(path)).map_err(fail)?;
        let sim = TmSimulation::create(&cfg).map_err(fail)?;
        *out = Box::into_raw(Box::new(sim));
        Ok(())
    })
}

/// Advances the simulation by `steps` time steps.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tm_simulation_step(sim: *mut TmSimulation, steps: u64) -> TmStatus {
    guard(|| {
        let sim = unsafe { sim.as_mut() }.ok_or_else(|| null("sim"))?;
        sim.advance(steps).map_err(fail)
    })
}

/// Reports the diagnostics of the current state.
///
/// # Safety
/// `sim` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tm_simulation_diagnostics(sim: *const TmSimulation, out: *mut TmDiagnostics) -> TmStatus {
    guard(|| {
        let sim = unsafe { sim.as_ref() }.ok_or_else(|| null("sim"))?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let d = &sim.diag;
        *out = TmDiagnostics {
            step: d.step as u64,
            t: d.t,
            grad_m: d.norms.grad_m,
            h_l2: d.norms.h_l2,
            curl_h: d.norms.curl_h,
            energy: d.energy,
            ledger_lhs: sim.entry.lhs,
            ledger_ok: i32::from(sim.entry.ok),
            unit_deviation: d.unit_deviation,
            solver_residual: d.solver_residual,
        };
        Ok(())
    })
}

/// Number of energy-ledger violations since creation.
///
/// # Safety
/// `sim` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tm_simulation_ledger_violations(sim: *const TmSimulation, out: *mut u64) -> TmStatus {
    guard(|| {
        let sim = unsafe { sim.as_ref() }.ok_or_else(|| null("sim"))?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = sim.violations;
        Ok(())
    })
}

/// Number of magnetization nodes and of field edges.
///
/// # Safety
/// `sim` must be a live handle; `nodes` and `edges` writable.
#[no_mangle]
pub unsafe extern "C" fn tm_simulation_sizes(sim: *const TmSimulation, nodes: *mut usize, edges: *mut usize) -> TmStatus {
    guard(|| {
        let sim = unsafe { sim.as_ref() }.ok_or_else(|| null("sim"))?;
        let nodes = unsafe { nodes.as_mut() }.ok_or_else(|| null("nodes"))?;
        let edges = unsafe { edges.as_mut() }.ok_or_else(|| null("edges"))?;
        *nodes = sim.state.m.len();
        *edges = sim.state.h.len();
        Ok(())
    })
}

/// Copies the nodal magnetization as `x, y, z` triples into `buf`, which
/// must hold `3 * nodes` doubles.
///
/// # Safety
/// `sim` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tm_simulation_magnetization(sim: *const TmSimulation, buf: *mut f64, len: usize) -> TmStatus {
    guard(|| {
        let sim = unsafe { sim.as_ref() }.ok_or_else(|| null("sim"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let need = 3 * sim.state.m.len();
        if len < need {
            set_error(&format!("buffer holds {len} doubles, {need} needed"));
            return Err(TmStatus::BufferTooSmall);
        }
        let out = unsafe { std::slice::from_raw_parts_mut(buf, need) };
        for (chunk, v) in out.chunks_exact_mut(3).zip(sim.state.m.values()) {
            chunk.copy_from_slice(v);
        }
        Ok(())
    })
}

/// Copies the edge circulations of the field into `buf` (`edges` doubles).
///
/// # Safety
/// `sim` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tm_simulation_field(sim: *const TmSimulation, buf: *mut f64, len: usize) -> TmStatus {
    guard(|| {
        let sim = unsafe { sim.as_ref() }.ok_or_else(|| null("sim"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let coeffs = sim.state.h.coeffs();
        if len < coeffs.len() {
            set_error(&format!("buffer holds {len} doubles, {} needed", coeffs.len()));
            return Err(TmStatus::BufferTooSmall);
        }
        unsafe { std::slice::from_raw_parts_mut(buf, coeffs.len()) }.copy_from_slice(coeffs);
        Ok(())
    })
}

/// Writes the current state as a legacy ASCII VTK file.
///
/// # Safety
/// `sim` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tm_simulation_write_vtk(sim: *const TmSimulation, path: *const c_char) -> TmStatus {
    guard(|| {
        let sim = unsafe { sim.as_ref() }.ok_or_else(|| null("sim"))?;
        if path.is_null() {
            return Err(null("path"));
        }
        let path = unsafe { CStr::from_ptr(path) }.to_string_lossy().into_owned();
        export_vtk(&sim.state, sim.stepper.discretization().mesh(), path).map_err(fail)
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `sim` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tm_simulation_free(sim: *mut TmSimulation) {
    if !sim.is_null() {
        drop(unsafe { Box::from_raw(sim) });
    }
}

/// Evaluates the reference initial magnetization at `x`.
///
/// # Safety
/// `x` must point to 3 readable doubles and `out` to 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tm_initial_m0(x: *const f64, out: *mut f64) -> TmStatus {
    guard(|| {
        if x.is_null() || out.is_null() {
            return Err(null("x or out"));
        }
        let p = unsafe { std::slice::from_raw_parts(x, 3) };
        let m = initial_m0([p[0], p[1], p[2]]);
        unsafe { std::slice::from_raw_parts_mut(out, 3) }.copy_from_slice(&m);
        Ok(())
    })
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}
