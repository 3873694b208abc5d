//! Monitored norms, the discrete energy and the cumulative energy ledger.

use crate::assembly::Discretization;
use crate::fem::{edge_field_curl, EdgeField, NodalField};
use crate::mesh::Mesh;
use crate::sparse::CsrMatrix;
use crate::timestepper::{SchemeParams, SimState};
use crate::vec3;
use crate::{Error, Result};

/// Relative slack of the energy ledger.
pub const LEDGER_REL_TOL: f64 = 1e-8;
/// Absolute slack, relevant only when the initial energy vanishes.
pub const LEDGER_ABS_TOL: f64 = 1e-24;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Norms {
    /// `‖∇m‖` over the ferromagnet.
    pub grad_m: f64,
    /// `‖H‖` over the cavity.
    pub h_l2: f64,
    /// `‖∇×H‖` over the cavity.
    pub curl_h: f64,
}

/// Squared dissipation norms of one step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dissipation {
    /// `‖v‖²` over the ferromagnet.
    pub v_sq: f64,
    /// `‖(H⁽ʲ⁺¹⁾ − H⁽ʲ⁾)/k‖²`
    pub dt_h_sq: f64,
    /// `‖∇×(H⁽ʲ⁺¹⁾ + H⁽ʲ⁾)/2‖²`
    pub curl_half_sq: f64,
}

/// Everything recorded about one state of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub norms: Norms,
    pub energy: f64,
    /// Dissipation of the step that produced this state (zero at step 0).
    pub dissipation: Dissipation,
    /// `max_n |v·m| / (1 + |v|)` against the magnetization the frame came from.
    pub tangency: f64,
    /// `max_n (|m⁽ʲ⁺¹⁾ − m⁽ʲ⁾|/k − |v|)`
    pub rate_excess: f64,
    /// Smallest `|m + k v|` over the nodes.
    pub min_denominator: f64,
    /// `max_n ||m(x_n)| − 1|`
    pub unit_deviation: f64,
    pub solver_residual: f64,
    pub solver_iterations: usize,
}

/// One row of the energy ledger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    pub step: usize,
    /// Energy plus accumulated dissipation.
    pub lhs: f64,
    /// Initial energy.
    pub rhs: f64,
    pub ok: bool,
}

/// `Σ_c u_cᵀ S u_c` over the three components of a nodal field.
pub fn nodal_quadratic_form(s: &CsrMatrix, u: &NodalField) -> f64 {
    let mut total = 0.0;
    for r in 0..s.nrows() {
        let (cols, vals) = s.row(r);
        let su = cols
            .iter()
            .zip(vals)
            .fold([0.0; 3], |acc, (&c, &v)| vec3::axpy(acc, v, u[c]));
        total += vec3::dot(u[r], su);
    }
    total
}

/// `‖∇u‖²` of a nodal field given the P1 stiffness matrix, evaluated as
/// `−½ Σ_{r≠c} K_rc |u_r − u_c|²` so that constants give exactly zero.
pub fn dirichlet_energy(stiffness: &CsrMatrix, u: &NodalField) -> f64 {
    let mut total = 0.0;
    for (r, c, v) in stiffness.iter() {
        if r != c {
            total -= 0.5 * v * vec3::norm_sq(vec3::sub(u[r], u[c]));
        }
    }
    total
}

pub fn norms(disc: &Discretization, state: &SimState) -> Norms {
    let eta = state.h.coeffs();
    Norms {
        grad_m: dirichlet_energy(&disc.stiffness, &state.m).max(0.0).sqrt(),
        h_l2: disc.edge_mass.bilinear(eta, eta).max(0.0).sqrt(),
        curl_h: curl_norm_sq(disc.mesh(), &state.h).sqrt(),
    }
}

/// `‖∇×u‖²` summed element by element; exactly zero for gradients of
/// interpolated constants.
pub fn curl_norm_sq(mesh: &Mesh, u: &EdgeField) -> f64 {
    (0..mesh.n_tets())
        .map(|t| mesh.geometry(t).volume * vec3::norm_sq(edge_field_curl(u, mesh, t)))
        .sum()
}

/// `‖∇m‖² + ‖H‖² + λ₂ μ⁻¹ μ₀⁻¹ σ ‖∇×H‖²`
pub fn energy_from_norms(n: &Norms, params: &SchemeParams) -> f64 {
    let curl_weight = params.lambda2 / (params.mu() * params.mu0) * params.sigma;
    n.grad_m * n.grad_m + n.h_l2 * n.h_l2 + curl_weight * n.curl_h * n.curl_h
}

pub fn discrete_energy(disc: &Discretization, state: &SimState, params: &SchemeParams) -> f64 {
    energy_from_norms(&norms(disc, state), params)
}

/// Dissipation norms of a step from its velocity and consecutive edge fields.
pub fn dissipation(disc: &Discretization, v: &NodalField, prev: &EdgeField, next: &EdgeField, k: f64) -> Dissipation {
    let dt: Vec<f64> = next.coeffs().iter().zip(prev.coeffs()).map(|(a, b)| (a - b) / k).collect();
    let half: Vec<f64> = next.coeffs().iter().zip(prev.coeffs()).map(|(a, b)| 0.5 * (a + b)).collect();
    Dissipation {
        v_sq: nodal_quadratic_form(&disc.mass, v),
        dt_h_sq: disc.edge_mass.bilinear(&dt, &dt),
        curl_half_sq: disc.curlcurl.bilinear(&half, &half),
    }
}

/// Running check that energy plus accumulated dissipation stays below the
/// initial energy.
#[derive(Debug, Clone)]
pub struct EnergyLedger {
    e0: f64,
    k: f64,
    c: f64,
    curl_weight: f64,
    accumulated: f64,
}

impl EnergyLedger {
    pub fn new(params: &SchemeParams, e0: f64) -> Self {
        EnergyLedger {
            e0,
            k: params.k,
            c: params.dissipation_constant(),
            curl_weight: 2.0 * params.sigma / params.mu0,
            accumulated: 0.0,
        }
    }

    pub fn tolerance(&self) -> f64 {
        LEDGER_REL_TOL * self.e0 + LEDGER_ABS_TOL
    }

    pub fn push(&mut self, diag: &StepDiagnostics) -> LedgerEntry {
        let d = &diag.dissipation;
        self.accumulated += self.k * (self.c * (d.v_sq + d.dt_h_sq) + self.curl_weight * d.curl_half_sq);
        let lhs = diag.energy + self.accumulated;
        LedgerEntry {
            step: diag.step,
            lhs,
            rhs: self.e0,
            ok: lhs <= self.e0 + self.tolerance(),
        }
    }
}

/// Replays the ledger over a recorded trajectory; the first entry fixes the
/// initial energy.
pub fn energy_ledger(trajectory: &[StepDiagnostics], params: &SchemeParams) -> Vec<LedgerEntry> {
    let Some(first) = trajectory.first() else {
        return Vec::new();
    };
    let mut ledger = EnergyLedger::new(params, first.energy);
    trajectory.iter().map(|d| ledger.push(d)).collect()
}

/// `(h³ Σ_n |u(x_n)|ᵖ)^{1/p}` with `h` the grid spacing; the maximum nodal
/// length for `p = ∞`.
pub fn discrete_lp_norm(u: &NodalField, p: f64, mesh: &Mesh) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("discrete Lp norm needs p >= 1, got {p}")));
    }
    let lengths = u.values().iter().map(|&v| vec3::norm(v));
    if p.is_infinite() {
        return Ok(lengths.fold(0.0, f64::max));
    }
    let h = mesh.spacing();
    let sum: f64 = lengths.map(|l| l.powf(p)).sum();
    Ok((h * h * h * sum).powf(1.0 / p))
}

/// `‖u‖` over the ferromagnet with the consistent P1 mass matrix.
pub fn l2_norm(disc: &Discretization, u: &NodalField) -> f64 {
    nodal_quadratic_form(&disc.mass, u).max(0.0).sqrt()
}
