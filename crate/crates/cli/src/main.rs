//! `twophase` command-line driver.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 solver failure,
//! 3 an invariant check failed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use twophase::config::RunConfig;
use twophase::grid::FaceVectorField;
use twophase::output::{self, CsvWriter, Manifest};
use twophase::stepper::{audit_eps, audit_energy_inequality, Stepper};
use twophase::studies;
use twophase::verify::{self, Suite};
use twophase::Error;

#[derive(Parser)]
#[command(name = "twophase", version, about = "Energy-stable two-phase flow solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configured scenario and write CSV, snapshots and a manifest.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of steps (overrides `steps`).
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Run invariant suites and print one line per check.
    Verify {
        #[arg(long, value_parser = ["ops", "ch", "ns", "energy"])]
        suite: Option<String>,
    },
    /// Temporal self-convergence: `steps` coarse steps at `solver.h`, refined
    /// `levels` times, against a reference four times finer than the finest.
    Convergence {
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Matched-density run against the constant-density path.
    CompareMatched {
        config: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
    },
}

enum Failure {
    Config(Error),
    Solver(Error),
    Invariant(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } | Error::Validation(_) => Failure::Config(e),
            other => Failure::Solver(other),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn load(path: &Path) -> std::result::Result<RunConfig, Failure> {
    RunConfig::load(path).map_err(Failure::Config)
}

fn cmd_run(config: &Path, out: Option<PathBuf>, steps: Option<usize>) -> CmdResult {
    let mut cfg = load(config)?;
    if let Some(n) = steps {
        cfg.steps = n;
    }
    let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir).map_err(|e| Failure::Solver(e.into()))?;
    fs::write(dir.join("config.json"), cfg.echo_string()).map_err(|e| Failure::Solver(e.into()))?;

    let sc = &cfg.scenario;
    let stepper = Stepper::new(sc.params.clone(), cfg.stepper.clone())?;
    let initial = stepper.initial_state(sc.initial_phi()?, FaceVectorField::zeros(sc.grid))?;
    let mut energy = CsvWriter::energy(&dir.join("energy.csv"))?;
    let mut diag = CsvWriter::diagnostics(&dir.join("diagnostics.csv"))?;
    let mut eps = 0.0;
    let mut m0 = 0.0;
    let mut violations = Vec::new();
    let every = cfg.output.snapshot_every;
    let outcome = stepper.run(initial, cfg.steps, |state, r| {
        energy.write(r)?;
        diag.write(r)?;
        if r.step == 0 {
            eps = audit_eps(&cfg.stepper, r.e_tot);
            m0 = r.mass;
        } else {
            let a = audit_energy_inequality(r, eps);
            if !a.pass {
                violations.push(format!("step {}: energy residual {:e} below -{:e}", r.step, a.residual, a.eps));
            }
            if (r.mass - m0).abs() > 1e-10 * sc.grid.area() {
                violations.push(format!("step {}: mass drift {:e}", r.step, r.mass - m0));
            }
        }
        if every > 0 && r.step % every == 0 {
            let stem = format!("step_{:06}", r.step);
            output::write_snapshot(state, &snap_dir, &stem)?;
            if cfg.output.vtk {
                output::write_vtk(state, &snap_dir.join(format!("{stem}.vtk")))?;
            }
        }
        println!(
            "step {:>6}  t {:.6e}  E {:.10e}  residual {:+.3e}  outer {}",
            r.step, r.time, r.e_tot, r.ineq_residual, r.outer_iters
        );
        Ok(())
    });
    energy.flush()?;
    diag.flush()?;
    let traj = outcome?;
    let manifest = Manifest {
        name: sc.name.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: sc.initial.seed(),
        config: "config.json".into(),
        energy_csv: "energy.csv".into(),
        diagnostics_csv: "diagnostics.csv".into(),
        steps_requested: cfg.steps,
        steps_completed: traj.final_state.step,
        final_h: traj.h,
        retries: traj.retries,
    };
    output::write_manifest(&dir.join("manifest.json"), &manifest)?;
    println!("wrote {}", dir.display());
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invariant(violations.join("\n")))
    }
}

fn cmd_verify(suite: Option<String>) -> CmdResult {
    let suites: Vec<Suite> = match suite {
        Some(s) => vec![Suite::from_name(&s).expect("clap restricts suite names")],
        None => Suite::ALL.to_vec(),
    };
    let checks = verify::run_suites(&suites);
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!("{} of {} checks pass", checks.len() - failed, checks.len());
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Invariant(format!("{failed} checks failed")))
    }
}

fn cmd_convergence(config: &Path, levels: usize) -> CmdResult {
    let cfg = load(config)?;
    let study = studies::convergence_study(&cfg.scenario, &cfg.stepper, cfg.steps, levels)?;
    println!("T = {:e}, reference h = {:e}", study.final_time, study.h_ref);
    for (h, e) in &study.errors {
        println!("h {h:.6e}  error {e:.6e}");
    }
    for (k, p) in study.pairwise_orders.iter().enumerate() {
        println!("order level {} -> {}: {p:.4}", k, k + 1);
    }
    println!("fitted order: {:.4}", study.fitted_order);
    Ok(())
}

fn cmd_compare(config: &Path, steps: Option<usize>) -> CmdResult {
    let cfg = load(config)?;
    let d = studies::compare_matched(&cfg.scenario, &cfg.stepper, steps.unwrap_or(cfg.steps))?;
    println!("max field discrepancy: {d:.6e}");
    if d <= 1e-12 {
        Ok(())
    } else {
        Err(Failure::Invariant(format!("discrepancy {d:e} exceeds 1e-12")))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run { config, out, steps } => cmd_run(&config, out, steps),
        Command::Verify { suite } => cmd_verify(suite),
        Command::Convergence { config, levels } => cmd_convergence(&config, levels),
        Command::CompareMatched { config, steps } => cmd_compare(&config, steps),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("solver error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("invariant failure: {msg}");
            ExitCode::from(3)
        }
    }
}
