//! Command-line driver: one simulation per invocation.
//!
//! Exit codes: 0 when the energy ledger holds at every step, 2 when it was
//! violated, 1 on any other failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::{error, info, warn};

use thetamag::experiment::{export_mesh_vtk, run_experiment, SimulationConfig};

#[derive(Debug, Parser)]
#[command(name = "thetamag", version, about = "Coupled magnetization and eddy-current simulation on a cube")]
struct Cli {
    /// key = value configuration file; flags below override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// grid cells per axis
    #[arg(long)]
    n: Option<usize>,
    /// time step
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// applied field strength along z
    #[arg(long, allow_hyphen_values = true)]
    hs: Option<f64>,
    /// final time
    #[arg(long = "T")]
    t_final: Option<f64>,
    /// output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// VTK snapshot cadence in steps (0 disables)
    #[arg(long)]
    snapshot_every: Option<usize>,
    #[arg(long)]
    solver_tol: Option<f64>,
    /// also write the mesh to this VTK file
    #[arg(long)]
    dump_mesh: Option<PathBuf>,
}

impl Cli {
    fn config(&self) -> thetamag::Result<SimulationConfig> {
        let mut cfg = match &self.config {
            Some(path) => SimulationConfig::from_file(path)?,
            None => SimulationConfig::default(),
        };
        if let Some(v) = self.n {
            cfg.n_per_axis = v;
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(v) = self.theta {
            cfg.theta = v;
        }
        if let Some(v) = self.hs {
            cfg.hs = v;
        }
        if let Some(v) = self.t_final {
            cfg.t_final = v;
        }
        if let Some(v) = &self.out {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = self.snapshot_every {
            cfg.snapshot_every = v;
        }
        if let Some(v) = self.solver_tol {
            cfg.solver_tol = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> thetamag::Result<bool> {
    let cfg = cli.config()?;
    if let Some(path) = &cli.dump_mesh {
        export_mesh_vtk(&cfg.build_mesh()?, path)?;
    }
    let summary = run_experiment(&cfg)?;
    info!(
        "{} steps in {:.1}s, energy {:.6e} -> {:.6e}",
        summary.steps, summary.elapsed_seconds, summary.initial_energy, summary.final_energy
    );
    if !summary.ledger_clean() {
        warn!("energy ledger violated at {} steps", summary.ledger_violations.len());
    }
    println!("{}", cfg.out_dir.join("summary.json").display());
    Ok(summary.ledger_clean())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            error!("{e}");
            ExitCode::from(1)
        }
    }
}
