//! Acceptance suite: prints one PASS/FAIL line per criterion and exits with
//! a failure status if any criterion fails.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thetamag::assembly::Discretization;
use thetamag::diagnostics::dirichlet_energy;
use thetamag::experiment::SimulationConfig;
use thetamag::fem::{evaluate_edge_field, interpolate_edge, reintegrate_edge_field, tangent_frame, EdgeField, NodalField};
use thetamag::mesh::{build_uniform_cube_mesh, check_weak_acuteness, Aabb, Mesh};
use thetamag::timestepper::{Backend, RunOutcome, Stepper};
use thetamag::vec3::{self, Vec3};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn reference_run(hs: f64, theta: f64, k: f64, steps: usize) -> RunOutcome {
    let cfg = SimulationConfig {
        hs,
        theta,
        k,
        t_final: k * steps as f64,
        ..Default::default()
    };
    let (stepper, state) = cfg.setup().expect("setup");
    stepper.run(state, steps, |_, _, _| Ok(())).expect("run")
}

fn unit_sphere(run: &RunOutcome) -> Verdict {
    let worst = run.trajectory.iter().map(|d| d.unit_deviation).fold(0.0, f64::max);
    verdict(
        worst <= 1e-12 && run.trajectory.len() == 1001,
        format!("max ||m|-1| = {worst:.2e} over {} states", run.trajectory.len()),
    )
}

fn energy_inequality(run: &RunOutcome) -> Verdict {
    let mut bad = run.violations();
    let mut report = vec![format!("Hs=0: {bad} violations in {} steps", run.ledger.len() - 1)];
    for hs in [30.0, -30.0, 100.0, -100.0, 1000.0, -1000.0] {
        let r = reference_run(hs, 0.7, 1e-3, 200);
        let worst = r.ledger[1..]
            .iter()
            .map(|e| (e.lhs - e.rhs) / e.rhs)
            .fold(f64::NEG_INFINITY, f64::max);
        bad += r.violations();
        report.push(format!("Hs={hs}: {} violations, max (lhs-E0)/E0 = {worst:.2e}", r.violations()));
    }
    verdict(bad == 0, report.join("; "))
}

fn weak_acuteness() -> Verdict {
    let mut worst = f64::NEG_INFINITY;
    let mut all = true;
    for n in [1, 2, 4, 8] {
        let w = check_weak_acuteness(&build_uniform_cube_mesh(n, Aabb::unit()).unwrap());
        worst = worst.max(w.worst_offdiag);
        all &= w.ok && w.worst_offdiag <= 1e-14;
    }
    verdict(all, format!("largest off-diagonal stiffness entry {worst:.2e}"))
}

fn non_expansiveness() -> Verdict {
    let mesh = build_uniform_cube_mesh(4, Aabb::unit()).unwrap();
    let disc = Discretization::new(Arc::new(mesh));
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations = 0;
    let mut worst_ratio = 0.0_f64;
    for _ in 0..100 {
        let u: Vec<Vec3> = (0..disc.mesh().n_nodes())
            .map(|_| {
                let d = loop {
                    let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                    let l = vec3::norm(v);
                    if l > 0.1 && l <= 1.0 {
                        break vec3::scale(1.0 / l, v);
                    }
                };
                vec3::scale(rng.gen_range(1.0..3.0), d)
            })
            .collect();
        let normalized: Vec<Vec3> = u.iter().map(|&v| vec3::scale(1.0 / vec3::norm(v), v)).collect();
        let before = dirichlet_energy(&disc.stiffness, &NodalField::new(u));
        let after = dirichlet_energy(&disc.stiffness, &NodalField::new(normalized));
        worst_ratio = worst_ratio.max(after / before);
        if after > before * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    verdict(violations == 0, format!("{violations} violations, max energy ratio {worst_ratio:.4}"))
}

fn rate_bound(run: &RunOutcome) -> Verdict {
    let worst = run.trajectory[1..].iter().map(|d| d.rate_excess).fold(f64::NEG_INFINITY, f64::max);
    verdict(worst <= 1e-12, format!("max_n (|dm|/k - |v|) = {worst:.2e}"))
}

fn oracle_equivalence() -> Verdict {
    let cfg = SimulationConfig {
        n_per_axis: 1,
        hs: 30.0,
        ..Default::default()
    };
    let (stepper, state) = cfg.setup().unwrap();
    let sys = stepper.system(&state).unwrap();
    let disc = stepper.discretization().clone();
    let oracle = Stepper::new(disc, *stepper.params(), Backend::DenseOracle).unwrap();
    let (a, _) = stepper.step(&state).unwrap();
    let (b, _) = oracle.step(&state).unwrap();
    let nodal_gap = |x: &NodalField, y: &NodalField| {
        x.values()
            .iter()
            .zip(y.values())
            .flat_map(|(p, q)| (0..3).map(move |i| (p[i] - q[i]).abs()))
            .fold(0.0, f64::max)
    };
    let v_gap = nodal_gap(&a.v_last, &b.v_last);
    let h_gap = a.h.coeffs().iter().zip(b.h.coeffs()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let m_gap = nodal_gap(&a.m, &b.m);
    let worst = v_gap.max(h_gap).max(m_gap);
    verdict(
        sys.dim() == 35 && worst <= 1e-8,
        format!("dim {}, max coefficient gap {worst:.2e} (v {v_gap:.2e}, H {h_gap:.2e}, m {m_gap:.2e})", sys.dim()),
    )
}

fn tangency(run: &RunOutcome) -> Verdict {
    let worst = run.trajectory[1..].iter().map(|d| d.tangency).fold(0.0, f64::max);
    // the reference run starts from a tangent frame of the stored state
    let cfg = SimulationConfig::default();
    let (_, state) = cfg.setup().unwrap();
    let frame_ok = tangent_frame(&state.m).is_ok();
    verdict(
        worst <= 1e-9 && frame_ok,
        format!("max_n |v.m|/(1+|v|) = {worst:.2e}"),
    )
}

fn theta_regime() -> Verdict {
    let explicit = reference_run(0.0, 0.0, 5e-2, 100);
    let implicit = reference_run(0.0, 0.7, 5e-2, 100);
    let e0 = explicit.trajectory[0].energy;
    let e_max = explicit.trajectory.iter().map(|d| d.energy).fold(0.0, f64::max);
    let unstable = explicit.violations() > 0 || e_max > e0;
    verdict(
        unstable && implicit.violations() == 0,
        format!(
            "theta=0: {} violations, max energy {:.3e} (E0 {:.3e}); theta=0.7: {} violations",
            explicit.violations(),
            e_max,
            e0,
            implicit.violations()
        ),
    )
}

fn figure_shape(run: &RunOutcome) -> Verdict {
    let tol = 1e-8 * run.ledger[0].rhs;
    let increases = run.ledger.windows(2).filter(|w| w[1].lhs > w[0].lhs + tol).count();
    let g0 = run.trajectory[0].norms.grad_m;
    let g1 = run.trajectory.last().unwrap().norms.grad_m;
    verdict(
        increases == 0 && g1 < g0,
        format!("{increases} ledger increases; |grad m| {g0:.4} -> {g1:.4}"),
    )
}

fn random_point_in(mesh: &Mesh, tet: usize, rng: &mut ChaCha8Rng) -> Vec3 {
    let mut b: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
    let s: f64 = b.iter().sum();
    b.iter_mut().for_each(|v| *v /= s);
    let p = mesh.tet_points(tet);
    (0..4).fold([0.0; 3], |acc, i| vec3::axpy(acc, b[i], p[i]))
}

fn nedelec_round_trip() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut round = 0.0_f64;
    let mut constant = 0.0_f64;
    for n in [1, 2, 4] {
        let mesh = build_uniform_cube_mesh(n, Aabb::unit()).unwrap();
        let smooth = interpolate_edge(|x| [x[1] * x[2], (3.0 * x[0]).sin(), 1.0 - x[0] * x[1]], &mesh);
        let random = EdgeField::new((0..mesh.n_edges()).map(|_| rng.gen_range(-1.0..1.0)).collect());
        for u in [smooth, random] {
            let back = reintegrate_edge_field(&u, &mesh);
            let gap = u.coeffs().iter().zip(back.coeffs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            round = round.max(gap);
        }
        let c = [0.3, -1.7, 2.2];
        let u = interpolate_edge(|_| c, &mesh);
        for t in 0..mesh.n_tets() {
            for _ in 0..4 {
                let x = random_point_in(&mesh, t, &mut rng);
                let v = evaluate_edge_field(&u, x, t, &mesh).unwrap();
                constant = constant.max(vec3::norm(vec3::sub(v, c)));
            }
        }
    }
    verdict(
        round <= 1e-12 && constant <= 1e-13,
        format!("round-trip gap {round:.2e}, constant reproduction gap {constant:.2e}"),
    )
}

fn main() {
    let started = Instant::now();
    let reference = reference_run(0.0, 0.7, 1e-3, 1000);
    let results: Vec<(usize, &str, Verdict)> = vec![
        (1, "unit-sphere constraint", unit_sphere(&reference)),
        (2, "discrete energy inequality", energy_inequality(&reference)),
        (3, "weak acuteness", weak_acuteness()),
        (4, "projection non-expansiveness", non_expansiveness()),
        (5, "nodal rate bound", rate_bound(&reference)),
        (6, "sparse vs dense oracle step", oracle_equivalence()),
        (7, "tangency of v", tangency(&reference)),
        (8, "theta stability contrast", theta_regime()),
        (9, "energy decay and exchange trend", figure_shape(&reference)),
        (10, "edge element round trip", nedelec_round_trip()),
    ];
    let mut failed = 0;
    for (id, name, v) in &results {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {tag}: {name} ({})", v.detail);
        failed += usize::from(!v.pass);
    }
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        results.len() - failed,
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
