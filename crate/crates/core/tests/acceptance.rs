//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.
//!
//! The long runs share state: criteria 1-4 and 10 come from one 64x64 run.

use std::process::ExitCode;
use std::time::Instant;

use twophase::grid::{FaceVectorField, MacGrid};
use twophase::output;
use twophase::scenario::{InitialCondition, Scenario};
use twophase::stepper::Stepper;
use twophase::studies;
use twophase::verify;
use twophase::{EnergyReport, ModelParams, PotentialSpec, Result, StepperConfig, Variant};

struct Outcome {
    id: usize,
    pass: bool,
    detail: String,
}

fn line(o: &Outcome) {
    println!("criterion {:>2}: {}  {}", o.id, if o.pass { "PASS" } else { "FAIL" }, o.detail);
}

fn spinodal(n: usize, variant: Variant, rho2: f64) -> Result<Scenario> {
    let l = 25.6 * n as f64 / 64.0;
    Ok(Scenario {
        name: format!("spinodal-{n}"),
        grid: MacGrid::new(n, n, l, l)?,
        initial: InitialCondition::Spinodal { seed: 1, mean: 0.0, amplitude: 0.05 },
        smoothing_sweeps: 0,
        params: ModelParams::constant(1.0, rho2, 1.0, 1.0, 1.0, PotentialSpec::logarithmic(1.0, 2.0), variant),
    })
}

/// Reports and `||v||` for steps `0..=steps`.
fn run(sc: &Scenario, cfg: &StepperConfig, steps: usize) -> Result<(Vec<EnergyReport>, Vec<f64>)> {
    let st = Stepper::new(sc.params.clone(), cfg.clone())?;
    let s0 = st.initial_state(sc.initial_phi()?, FaceVectorField::zeros(sc.grid))?;
    let mut norms = Vec::new();
    let traj = st.run(s0, steps, |s, _| {
        norms.push(s.v.norm());
        Ok(())
    })?;
    if traj.retries > 0 {
        println!("  note: {} step reductions, final h {:e}", traj.retries, traj.h);
    }
    Ok((traj.reports, norms))
}

/// Criterion-1 style audit: per-step residual and monotone total energy.
fn audit(reports: &[EnergyReport], rel: f64) -> (bool, f64, f64) {
    let e0 = reports[0].e_tot.abs();
    let eps = rel * e0;
    let worst_res = reports[1..].iter().map(|r| r.ineq_residual).fold(f64::INFINITY, f64::min);
    let worst_rise = reports.windows(2).map(|w| w[1].e_tot - w[0].e_tot).fold(f64::NEG_INFINITY, f64::max);
    (worst_res >= -eps && worst_rise <= eps, worst_res / e0, worst_rise / e0)
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut out = Vec::new();
    let cfg = StepperConfig { h: 1e-3, ..Default::default() };

    // 1-4, 10: 64x64 spinodal, logarithmic potential, densities 1 and 3
    match spinodal(64, Variant::Agg, 3.0).and_then(|sc| Ok((run(&sc, &cfg, 100)?, sc))) {
        Ok(((reports, norms), sc)) => {
            let (ok, res, rise) = audit(&reports, 1e-8);
            out.push(Outcome {
                id: 1,
                pass: ok && reports.len() == 101,
                detail: format!("min residual/|E0| {res:.3e}, max rise/|E0| {rise:.3e}, steps {}", reports.len() - 1),
            });
            let m0 = reports[0].mass;
            let drift = reports.iter().map(|r| (r.mass - m0).abs()).fold(0.0, f64::max) / sc.grid.area();
            out.push(Outcome { id: 2, pass: drift <= 1e-10, detail: format!("max mass drift/|Omega| {drift:.3e}") });
            let mx = reports.iter().map(|r| r.max_phi.max(-r.min_phi)).fold(0.0, f64::max);
            out.push(Outcome { id: 3, pass: mx <= 1.0 - 1e-8, detail: format!("max |phi| {mx:.12}") });
            let worst = reports
                .iter()
                .zip(&norms)
                .skip(1)
                .map(|(r, n)| if r.div_v_inf == 0.0 { 0.0 } else { r.div_v_inf / n })
                .fold(0.0, f64::max);
            out.push(Outcome { id: 4, pass: worst <= 1e-8, detail: format!("max |div v|/||v|| {worst:.3e}") });
            let finite = reports.iter().all(|r| {
                let d = &r.diagnostics;
                d.integral_mu.is_finite() && d.l2_psi0_prime.is_finite() && d.mean_mu.is_finite() && d.l2_grad_phi.is_finite()
            });
            let dir = std::env::temp_dir().join(format!("twophase-acceptance-{}", std::process::id()));
            let logged = std::fs::create_dir_all(&dir)
                .map_err(twophase::Error::from)
                .and_then(|_| {
                    let mut w = output::CsvWriter::diagnostics(&dir.join("diagnostics.csv"))?;
                    for r in &reports {
                        w.write(r)?;
                    }
                    w.flush()?;
                    output::read_csv(&dir.join("diagnostics.csv"))
                })
                .map(|(_, rows)| rows.len() == reports.len() && rows.iter().flatten().all(|x| x.is_finite()))
                .unwrap_or(false);
            let _ = std::fs::remove_dir_all(&dir);
            let max_psi = reports.iter().map(|r| r.diagnostics.l2_psi0_prime).fold(0.0, f64::max);
            let max_int = reports.iter().map(|r| r.diagnostics.integral_mu.abs()).fold(0.0, f64::max);
            out.push(Outcome {
                id: 10,
                pass: finite && logged,
                detail: format!("{} rows logged, max |int mu| {max_int:.3e}, max ||Psi0'|| {max_psi:.3e}", reports.len()),
            });
        }
        Err(e) => {
            for id in [1, 2, 3, 4, 10] {
                out.push(Outcome { id, pass: false, detail: format!("run failed: {e}") });
            }
        }
    }

    // 5: operator identities on 100 random instances
    match verify::ops_suite(100) {
        Ok(checks) => {
            let keep: Vec<_> = checks.iter().filter(|c| c.threshold <= 1e-13).collect();
            let worst = keep.iter().map(|c| c.value).fold(0.0, f64::max);
            out.push(Outcome {
                id: 5,
                pass: keep.len() >= 5 && keep.iter().all(|c| c.pass),
                detail: format!("{} identities, worst relative defect {worst:.3e}", keep.len()),
            });
        }
        Err(e) => out.push(Outcome { id: 5, pass: false, detail: format!("{e}") }),
    }

    // 6: matched densities against the constant-density path
    let r6 = spinodal(32, Variant::Agg, 1.0).and_then(|sc| studies::compare_matched(&sc, &cfg, 50));
    out.push(match r6 {
        Ok(d) => Outcome { id: 6, pass: d <= 1e-12, detail: format!("max discrepancy {d:.3e} over 50 steps") },
        Err(e) => Outcome { id: 6, pass: false, detail: format!("{e}") },
    });

    // 7: Newton tail and dense 4x4 assemblies
    let r7 = (|| -> Result<(f64, usize, f64, f64)> {
        let hist = verify::newton_history()?;
        let tail = verify::tail_constants(&hist);
        let c = tail.iter().copied().fold(0.0, f64::max);
        let (jac, _) = verify::ch_jacobian_checks()?;
        let mut mom = 0.0f64;
        for v in [Variant::Agg, Variant::Appendix, Variant::ModelH] {
            mom = mom.max(verify::momentum_dense_check(v)?);
        }
        Ok((c, tail.len(), jac, mom))
    })();
    out.push(match r7 {
        Ok((c, n, jac, mom)) => Outcome {
            id: 7,
            pass: n > 0 && c <= 10.0 && jac <= 1e-10 && mom <= 1e-10,
            detail: format!("tail max r1/r0^2 {c:.3e} ({n} pairs), CH Jacobian {jac:.3e}, momentum {mom:.3e}"),
        },
        Err(e) => Outcome { id: 7, pass: false, detail: format!("{e}") },
    });

    // 8: temporal self-convergence with the polynomial potential
    let r8 = (|| -> Result<studies::ConvergenceStudy> {
        let sc = Scenario {
            name: "cosine".into(),
            grid: MacGrid::new(32, 32, 6.4, 6.4)?,
            initial: InitialCondition::Cosine { mean: 0.0, amplitude: 0.5 },
            smoothing_sweeps: 0,
            params: ModelParams::constant(1.0, 3.0, 1.0, 1.0, 1.0, PotentialSpec::double_well(1.0), Variant::Agg),
        };
        studies::convergence_study(&sc, &StepperConfig { h: 4e-3, ..Default::default() }, 10, 3)
    })();
    out.push(match r8 {
        Ok(s) => Outcome {
            id: 8,
            pass: (0.8..=1.2).contains(&s.fitted_order),
            detail: format!(
                "order {:.3} (pairwise {:?}), errors {:?}",
                s.fitted_order,
                s.pairwise_orders.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>(),
                s.errors.iter().map(|e| format!("{:.2e}", e.1)).collect::<Vec<_>>()
            ),
        },
        Err(e) => Outcome { id: 8, pass: false, detail: format!("{e}") },
    });

    // 9: appendix variant audit, and its beta = 0 reduction
    let r9 = (|| -> Result<(bool, f64, f64, f64)> {
        let sc = spinodal(32, Variant::Appendix, 3.0)?;
        let (reports, _) = run(&sc, &cfg, 50)?;
        let (ok, res, rise) = audit(&reports, 1e-8);
        let sc0 = spinodal(32, Variant::Appendix, 1.0)?;
        let a = Stepper::new(sc0.params.clone(), cfg.clone())?;
        let b = Stepper::new(studies::matched(&sc0.params, 1.0, Variant::ModelH), cfg.clone())?;
        let d = studies::compare_paths(&sc0.initial_phi()?, &a, &b, 50)?;
        Ok((ok && reports.len() == 51, res, rise, d))
    })();
    out.push(match r9 {
        Ok((ok, res, rise, d)) => Outcome {
            id: 9,
            pass: ok && d <= 1e-12,
            detail: format!("min residual/|E0| {res:.3e}, max rise/|E0| {rise:.3e}, beta=0 discrepancy {d:.3e}"),
        },
        Err(e) => Outcome { id: 9, pass: false, detail: format!("{e}") },
    });

    out.sort_by_key(|o| o.id);
    println!();
    for o in &out {
        line(o);
    }
    let failed = out.iter().filter(|o| !o.pass).count();
    println!("{} of {} criteria pass ({:.0} s)", out.len() - failed, out.len(), started.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
