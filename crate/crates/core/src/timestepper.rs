//! The θ-linear time loop: frame, coupled solve, nodal normalization.

use std::sync::Arc;

use log::warn;

use crate::assembly::{build_step_system, Discretization, StepSystem};
use crate::diagnostics::{self, EnergyLedger, LedgerEntry, StepDiagnostics};
use crate::fem::{interpolate_edge, interpolate_nodal, normalization_denominators, project_normalize, tangent_frame};
use crate::fem::{EdgeField, NodalField};
use crate::solver::{dense_solve_oracle, relative_residual, solve_sparse_with, SolveReport, SolverOptions, UsedMethod};
use crate::sparse::norm2;
use crate::vec3::{self, Vec3};
use crate::{Error, Result};

/// Largest accepted nodal `| |m0(x_n)| - 1 |` at initialization.
pub const INIT_UNIT_TOL: f64 = 1e-8;

/// Physical and discretization parameters of the scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    /// Precession coefficient.
    pub lambda1: f64,
    /// Damping coefficient.
    pub lambda2: f64,
    pub mu0: f64,
    /// Conductivity.
    pub sigma: f64,
    pub theta: f64,
    /// Time step.
    pub k: f64,
    /// Final time.
    pub t_final: f64,
}

impl Default for SchemeParams {
    fn default() -> Self {
        SchemeParams {
            lambda1: 1.0,
            lambda2: 1.0,
            mu0: 1.0,
            sigma: 1.0,
            theta: 0.7,
            k: 1e-3,
            t_final: 1.0,
        }
    }
}

impl SchemeParams {
    /// `λ₁² + λ₂²`
    pub fn mu(&self) -> f64 {
        self.lambda1 * self.lambda1 + self.lambda2 * self.lambda2
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda1, self.lambda2, self.mu0, self.sigma, self.theta, self.k, self.t_final];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("scheme parameters must be finite".into()));
        }
        let checks = [
            (self.lambda2 > 0.0, "lambda2 must be positive"),
            (self.mu0 > 0.0, "mu0 must be positive"),
            (self.sigma >= 0.0, "sigma must be nonnegative"),
            ((0.0..=1.0).contains(&self.theta), "theta must lie in [0, 1]"),
            (self.k > 0.0, "time step must be positive"),
            (self.t_final > 0.0, "final time must be positive"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::InvalidArgument((*msg).into())),
            None => Ok(()),
        }
    }

    /// Dissipation weight `λ₂/μ` of the energy ledger.
    pub fn dissipation_constant(&self) -> f64 {
        self.lambda2 / self.mu()
    }
}

/// Number of steps `T/k`, rounded down with a warning when not integral.
pub fn steps_for(t_final: f64, k: f64) -> usize {
    let ratio = t_final / k;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
        nearest as usize
    } else {
        let j = ratio.floor() as usize;
        warn!("T/k = {ratio} is not an integer; running {j} steps");
        j
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub j: usize,
    pub t: f64,
    pub m: NodalField,
    pub h: EdgeField,
    /// Velocity of the step that produced `m` (zero initially).
    pub v_last: NodalField,
}

/// Interpolates the initial data onto the mesh.
pub fn init_state(
    m0: impl Fn(Vec3) -> Vec3,
    h0: impl Fn(Vec3) -> Vec3,
    disc: &Discretization,
    params: &SchemeParams,
) -> Result<SimState> {
    params.validate()?;
    let mesh = disc.mesh();
    let m = interpolate_nodal(m0, mesh);
    for (n, &v) in m.values().iter().enumerate() {
        let dev = (vec3::norm(v) - 1.0).abs();
        if !(dev <= INIT_UNIT_TOL) {
            return Err(Error::InvalidArgument(format!(
                "initial magnetization has |m0| = {} at node {n}",
                vec3::norm(v)
            )));
        }
    }
    Ok(SimState {
        j: 0,
        t: 0.0,
        v_last: NodalField::zeros(m.len()),
        m,
        h: interpolate_edge(h0, mesh),
    })
}

/// How the step system is solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    Sparse(SolverOptions),
    /// Dense elimination; small meshes only.
    DenseOracle,
}

/// Advances states with fixed parameters on a fixed discretization.
#[derive(Debug, Clone)]
pub struct Stepper {
    disc: Arc<Discretization>,
    params: SchemeParams,
    backend: Backend,
}

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub final_state: SimState,
    /// Diagnostics for steps `0..=J`.
    pub trajectory: Vec<StepDiagnostics>,
    /// Ledger entries for steps `0..=J`.
    pub ledger: Vec<LedgerEntry>,
}

impl RunOutcome {
    pub fn violations(&self) -> usize {
        self.ledger.iter().filter(|e| !e.ok).count()
    }
}

impl Stepper {
    pub fn new(disc: Arc<Discretization>, params: SchemeParams, backend: Backend) -> Result<Self> {
        params.validate()?;
        Ok(Stepper { disc, params, backend })
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }

    /// Diagnostics of a state before any step is taken from it.
    pub fn initial_diagnostics(&self, state: &SimState) -> StepDiagnostics {
        let norms = diagnostics::norms(&self.disc, state);
        StepDiagnostics {
            step: state.j,
            t: state.t,
            energy: diagnostics::energy_from_norms(&norms, &self.params),
            norms,
            dissipation: Default::default(),
            tangency: 0.0,
            rate_excess: f64::NEG_INFINITY,
            min_denominator: 1.0,
            unit_deviation: state.m.max_unit_deviation(),
            solver_residual: 0.0,
            solver_iterations: 0,
        }
    }

    /// Assembles the step system for `state` without solving it.
    pub fn system(&self, state: &SimState) -> Result<StepSystem> {
        let frame = tangent_frame(&state.m)?;
        build_step_system(&self.disc, &state.m, &state.h, &frame, &self.params)
    }

    /// One step of the scheme.
    pub fn step(&self, state: &SimState) -> Result<(SimState, StepDiagnostics)> {
        self.try_step(state).map_err(|e| Error::Step {
            step: state.j + 1,
            source: Box::new(e),
        })
    }

    fn try_step(&self, state: &SimState) -> Result<(SimState, StepDiagnostics)> {
        let k = self.params.k;
        let frame = tangent_frame(&state.m)?;
        let sys = build_step_system(&self.disc, &state.m, &state.h, &frame, &self.params)?;
        let (x, report) = self.solve(&sys, state.h.coeffs())?;
        let (alpha, eta) = sys.split(&x);
        let v = frame.expand(alpha);
        let h = EdgeField::new(eta.to_vec());
        let m = project_normalize(&state.m, &v, k)?;

        let mut tangency = 0.0_f64;
        let mut rate_excess = f64::NEG_INFINITY;
        for ((&mo, &mn), &vn) in state.m.values().iter().zip(m.values()).zip(v.values()) {
            let vlen = vec3::norm(vn);
            tangency = tangency.max(vec3::dot(vn, mo).abs() / (1.0 + vlen));
            rate_excess = rate_excess.max(vec3::norm(vec3::sub(mn, mo)) / k - vlen);
        }
        let min_denominator = normalization_denominators(&state.m, &v, k)
            .into_iter()
            .fold(f64::INFINITY, f64::min);

        let next = SimState {
            j: state.j + 1,
            t: (state.j + 1) as f64 * k,
            m,
            h,
            v_last: v,
        };
        let norms = diagnostics::norms(&self.disc, &next);
        let diag = StepDiagnostics {
            step: next.j,
            t: next.t,
            energy: diagnostics::energy_from_norms(&norms, &self.params),
            norms,
            dissipation: diagnostics::dissipation(&self.disc, &next.v_last, &state.h, &next.h, k),
            tangency,
            rate_excess,
            min_denominator,
            unit_deviation: next.m.max_unit_deviation(),
            solver_residual: report.residual,
            solver_iterations: report.iterations,
        };
        Ok((next, diag))
    }

    fn solve(&self, sys: &StepSystem, eta_prev: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        match self.backend {
            Backend::Sparse(opts) => {
                // correction from v = 0, H unchanged
                let mut x0 = vec![0.0; sys.dim()];
                x0[2 * sys.n_nodes..].copy_from_slice(eta_prev);
                let ax0 = sys.matrix.mul_vec(&x0);
                let r0: Vec<f64> = sys.rhs.iter().zip(&ax0).map(|(b, a)| b - a).collect();
                let (bn, rn) = (norm2(&sys.rhs), norm2(&r0));
                let tol = if rn > bn { opts.tol * bn / rn } else { opts.tol };
                let (dx, report) = solve_sparse_with(&sys.matrix, &r0, &SolverOptions { tol, ..opts })?;
                let x: Vec<f64> = x0.iter().zip(&dx).map(|(a, b)| a + b).collect();
                let residual = relative_residual(&sys.matrix, &x, &sys.rhs);
                if residual > opts.tol {
                    return Err(Error::Solver {
                        reason: "corrected solution misses the tolerance".into(),
                        residual,
                    });
                }
                Ok((x, SolveReport { residual, ..report }))
            }
            Backend::DenseOracle => {
                let x = dense_solve_oracle(&sys.matrix.to_dense(), &sys.rhs)?;
                let residual = relative_residual(&sys.matrix, &x, &sys.rhs);
                Ok((
                    x,
                    SolveReport {
                        residual,
                        iterations: 0,
                        method: UsedMethod::Direct,
                    },
                ))
            }
        }
    }

    /// Runs `steps` steps from `state`, evaluating the energy ledger online.
    /// `observer` sees every state including the initial one.
    pub fn run<F>(&self, state: SimState, steps: usize, mut observer: F) -> Result<RunOutcome>
    where
        F: FnMut(&SimState, &StepDiagnostics, &LedgerEntry) -> Result<()>,
    {
        let first = self.initial_diagnostics(&state);
        let mut ledger = EnergyLedger::new(&self.params, first.energy);
        let entry = ledger.push(&first);
        observer(&state, &first, &entry)?;
        let mut trajectory = vec![first];
        let mut entries = vec![entry];
        let mut state = state;
        for _ in 0..steps {
            let (next, diag) = self.step(&state)?;
            let entry = ledger.push(&diag);
            if !entry.ok {
                warn!(
                    "energy ledger violated at step {}: lhs {:.12e} > {:.12e}",
                    entry.step, entry.lhs, entry.rhs
                );
            }
            observer(&next, &diag, &entry)?;
            trajectory.push(diag);
            entries.push(entry);
            state = next;
        }
        Ok(RunOutcome {
            final_state: state,
            trajectory,
            ledger: entries,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_uniform_cube_mesh, Aabb};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disc(n: usize) -> Arc<Discretization> {
        Arc::new(Discretization::new(Arc::new(build_uniform_cube_mesh(n, Aabb::unit()).unwrap())))
    }

    fn stepper(d: &Arc<Discretization>, params: SchemeParams) -> Stepper {
        Stepper::new(d.clone(), params, Backend::Sparse(SolverOptions::default())).unwrap()
    }

    #[test]
    fn params_validation() {
        let p = SchemeParams::default();
        assert!(p.validate().is_ok());
        assert_eq!(p.mu(), 2.0);
        for bad in [
            SchemeParams { lambda2: 0.0, ..p },
            SchemeParams { mu0: -1.0, ..p },
            SchemeParams { sigma: -0.1, ..p },
            SchemeParams { theta: 1.5, ..p },
            SchemeParams { k: 0.0, ..p },
            SchemeParams { t_final: f64::NAN, ..p },
        ] {
            assert!(bad.validate().is_err());
        }
        assert!(SchemeParams { lambda1: 0.0, ..p }.validate().is_ok());
    }

    #[test]
    fn step_count() {
        assert_eq!(steps_for(1.0, 1e-3), 1000);
        assert_eq!(steps_for(0.1, 1e-3), 100);
        assert_eq!(steps_for(1.0, 0.3), 3);
    }

    #[test]
    fn init_rejects_non_unit_data() {
        let d = disc(1);
        let p = SchemeParams::default();
        assert!(init_state(|_| [0.0, 0.0, 1.1], |_| [0.0; 3], &d, &p).is_err());
        let s = init_state(|_| [0.0, 0.0, 1.0], |_| [0.0; 3], &d, &p).unwrap();
        let diag = stepper(&d, p).initial_diagnostics(&s);
        assert_eq!(diag.energy, 0.0);
        assert_eq!((s.j, s.t), (0, 0.0));
    }

    #[test]
    fn equilibrium_is_preserved() {
        let d = disc(2);
        let p = SchemeParams::default();
        let s0 = init_state(|_| [0.0, 0.0, 1.0], |_| [0.0, 0.0, 3.0], &d, &p).unwrap();
        let st = stepper(&d, p);
        let (s1, diag) = st.step(&s0).unwrap();
        for (a, b) in s0.m.values().iter().zip(s1.m.values()) {
            for i in 0..3 {
                assert!((a[i] - b[i]).abs() < 1e-10);
            }
        }
        for (a, b) in s0.h.coeffs().iter().zip(s1.h.coeffs()) {
            assert!((a - b).abs() < 1e-10);
        }
        let n0 = st.initial_diagnostics(&s0).norms;
        assert!((n0.h_l2 - diag.norms.h_l2).abs() < 1e-10);
        assert_eq!(s1.j, 1);
    }

    fn random_unit(n: usize, seed: u64) -> NodalField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        NodalField::new(
            (0..n)
                .map(|_| loop {
                    let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                    let l = vec3::norm(v);
                    if l > 0.2 && l <= 1.0 {
                        break vec3::scale(1.0 / l, v);
                    }
                })
                .collect(),
        )
    }

    #[test]
    fn random_steps_keep_invariants() {
        let d = disc(2);
        let p = SchemeParams { k: 1e-2, ..Default::default() };
        let m = random_unit(d.mesh().n_nodes(), 3);
        let h = interpolate_edge(|x| [x[1], 1.0 - x[2], x[0] * x[1]], d.mesh());
        let s0 = SimState { j: 0, t: 0.0, v_last: NodalField::zeros(m.len()), m, h };
        let out = stepper(&d, p).run(s0, 5, |_, _, _| Ok(())).unwrap();
        assert_eq!(out.trajectory.len(), 6);
        assert_eq!(out.violations(), 0);
        for diag in &out.trajectory[1..] {
            assert!(diag.unit_deviation <= 1e-12);
            assert!(diag.tangency <= 1e-9);
            assert!(diag.rate_excess <= 1e-12);
            assert!(diag.min_denominator >= 1.0 - 1e-9);
            assert!(diag.solver_residual <= 1e-10);
        }
    }

    #[test]
    fn zero_steps_hold_initial_diagnostics() {
        let d = disc(1);
        let p = SchemeParams::default();
        let s0 = init_state(crate::experiment::initial_m0, |_| [0.0; 3], &d, &p).unwrap();
        let out = stepper(&d, p).run(s0.clone(), 0, |_, _, _| Ok(())).unwrap();
        assert_eq!(out.trajectory.len(), 1);
        assert_eq!(out.final_state, s0);
        assert!(out.ledger[0].ok);
    }

    #[test]
    fn pure_damping_decreases_exchange_energy() {
        let d = disc(2);
        let p = SchemeParams {
            lambda1: 0.0,
            theta: 1.0,
            sigma: 0.0,
            k: 1e-2,
            ..Default::default()
        };
        let m = random_unit(d.mesh().n_nodes(), 11);
        let s0 = SimState {
            j: 0,
            t: 0.0,
            v_last: NodalField::zeros(m.len()),
            h: EdgeField::zeros(d.mesh().n_edges()),
            m,
        };
        let out = stepper(&d, p).run(s0, 20, |_, _, _| Ok(())).unwrap();
        let g: Vec<f64> = out.trajectory.iter().map(|t| t.norms.grad_m).collect();
        assert!(g[20] < 0.8 * g[0], "{g:?}");
        assert_eq!(out.violations(), 0);
    }

    #[test]
    fn dense_and_sparse_backends_agree() {
        let d = disc(1);
        let p = SchemeParams::default();
        let s0 = init_state(crate::experiment::initial_m0, |x| crate::experiment::initial_h0(x, 30.0, Aabb::unit()), &d, &p).unwrap();
        let (a, _) = stepper(&d, p).step(&s0).unwrap();
        let (b, _) = Stepper::new(d.clone(), p, Backend::DenseOracle).unwrap().step(&s0).unwrap();
        for (x, y) in a.h.coeffs().iter().zip(b.h.coeffs()) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn steps_are_deterministic() {
        let d = disc(2);
        let p = SchemeParams::default();
        let s0 = init_state(crate::experiment::initial_m0, |x| crate::experiment::initial_h0(x, 0.0, Aabb::unit()), &d, &p).unwrap();
        let st = stepper(&d, p);
        let a = st.run(s0.clone(), 3, |_, _, _| Ok(())).unwrap();
        let b = st.run(s0, 3, |_, _, _| Ok(())).unwrap();
        assert_eq!(a.final_state, b.final_state);
    }

    #[test]
    fn failures_carry_step_index() {
        let d = disc(1);
        let p = SchemeParams::default();
        let bad = SimState {
            j: 4,
            t: 0.0,
            m: NodalField::constant(d.mesh().n_nodes(), [0.0, 0.0, 2.0]),
            h: EdgeField::zeros(d.mesh().n_edges()),
            v_last: NodalField::zeros(d.mesh().n_nodes()),
        };
        match stepper(&d, p).step(&bad) {
            Err(Error::Step { step, .. }) => assert_eq!(step, 5),
            other => panic!("unexpected {other:?}"),
        }
    }
}
