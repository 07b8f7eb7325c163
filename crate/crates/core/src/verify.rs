//! Invariant suites behind `twophase verify`.
//!
//! Each check reports the measured quantity and its threshold. Random
//! instances come from the scenario LCG so results are reproducible.
//! Relative identities are measured against the sum of absolute values of the
//! terms being cancelled, which is the natural roundoff scale of a sum.

use std::fmt;

use crate::ch::{self, ChStepProblem};
use crate::error::{Error, Result};
use crate::grid::{FaceVectorField, MacGrid, ScalarField};
use crate::model::{CoefficientProfile, ModelParams, Variant};
use crate::ns::{self, NsStepProblem};
use crate::ops;
use crate::potential::PotentialSpec;
use crate::scenario::{InitialCondition, Lcg, Scenario};
use crate::stepper::{audit_eps, audit_energy_inequality, Stepper, StepperConfig};
use crate::studies;
use crate::transform::TransformA;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Ops,
    Ch,
    Ns,
    Energy,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Ops, Suite::Ch, Suite::Ns, Suite::Energy];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Ops => "ops",
            Suite::Ch => "ch",
            Suite::Ns => "ns",
            Suite::Energy => "energy",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:<6} {:<44} value {:.3e}  threshold {:.1e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.suite.name(),
            self.name,
            self.value,
            self.threshold
        )
    }
}

fn check_le(suite: Suite, name: &str, value: f64, threshold: f64) -> Check {
    Check { suite, name: name.into(), value, threshold, pass: value <= threshold }
}

pub fn run_suite(suite: Suite) -> Result<Vec<Check>> {
    match suite {
        Suite::Ops => ops_suite(100),
        Suite::Ch => ch_suite(),
        Suite::Ns => ns_suite(),
        Suite::Energy => energy_suite(),
    }
}

pub(crate) fn random_cells(g: MacGrid, rng: &mut Lcg, lo: f64, hi: f64) -> ScalarField {
    ScalarField { grid: g, data: (0..g.n_cells()).map(|_| rng.range(lo, hi)).collect() }
}

/// Random face field with zero normal boundary values.
pub(crate) fn random_faces(g: MacGrid, rng: &mut Lcg) -> FaceVectorField {
    let mut v = FaceVectorField {
        grid: g,
        x: (0..g.n_xfaces()).map(|_| rng.range(-1.0, 1.0)).collect(),
        y: (0..g.n_yfaces()).map(|_| rng.range(-1.0, 1.0)).collect(),
    };
    v.zero_boundary();
    v
}

fn abs_dot_faces(a: &FaceVectorField, b: &FaceVectorField) -> f64 {
    let s: f64 = a.x.iter().zip(&b.x).chain(a.y.iter().zip(&b.y)).map(|(p, q)| (p * q).abs()).sum();
    s * a.grid.cell_volume()
}

fn abs_dot_cells(a: &ScalarField, b: &ScalarField) -> f64 {
    a.data.iter().zip(&b.data).map(|(p, q)| (p * q).abs()).sum::<f64>() * a.grid.cell_volume()
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num.abs() / den
    }
}

/// Discrete operator identities over `instances` random draws; the reported
/// value is the worst relative defect.
pub fn ops_suite(instances: usize) -> Result<Vec<Check>> {
    let mut rng = Lcg::new(2024);
    let mut worst = [0.0f64; 7];
    for k in 0..instances {
        let g = MacGrid::new(4 + k % 9, 4 + (k * 7) % 11, 0.5 + rng.next_f64(), 0.5 + rng.next_f64())?;
        let u = random_faces(g, &mut rng);
        let w = random_faces(g, &mut rng);
        let p = random_cells(g, &mut rng, -1.0, 1.0);
        let q = random_cells(g, &mut rng, -1.0, 1.0);
        let gp = ops::grad_cells(&p);
        let du = ops::div_faces(&u);
        worst[0] = worst[0].max(ratio(du.dot(&p) + u.dot(&gp), abs_dot_cells(&du, &p) + abs_dot_faces(&u, &gp)));

        let kv = ops::skew_convection(&w, &u)?;
        worst[1] = worst[1].max(ratio(kv.dot(&u), abs_dot_faces(&kv, &u)));

        let phi = random_cells(g, &mut rng, -0.9, 0.9);
        let params = ModelParams::constant(1.0, 3.0, 1.0, 1.0, 1.0, PotentialSpec::logarithmic(1.0, 2.0), Variant::Agg);
        let jt = ns::compute_jtilde(&phi, &p, &params)?;
        let tv = ops::skew_flux_term(&jt, &u)?;
        worst[2] = worst[2].max(ratio(tv.dot(&u), abs_dot_faces(&tv, &u)));

        let coeff = ops::interp_center_to_face(&random_cells(g, &mut rng, 0.5, 2.0));
        let lp = ops::laplace_neumann(&p, &coeff)?;
        let lq = ops::laplace_neumann(&q, &coeff)?;
        worst[3] = worst[3].max(ratio(lp.dot(&q) - p.dot(&lq), abs_dot_cells(&lp, &q) + abs_dot_cells(&p, &lq)));
        let abs_sum: f64 = lp.data.iter().map(|x| x.abs()).sum::<f64>() * g.cell_volume();
        worst[4] = worst[4].max(ratio(lp.integral(), abs_sum));

        let eta = random_cells(g, &mut rng, 0.5, 2.0);
        let vu = ops::viscous_apply(&u, &eta)?;
        let q_diss = ops::strain_dissipation(&u, &eta)?;
        worst[5] = worst[5].max(ratio(vu.dot(&u) - q_diss, q_diss));

        let mu = random_cells(g, &mut rng, -1.0, 1.0);
        let adv = ops::advection(&u, &phi)?;
        let cap = ops::capillary_force(&mu, &phi)?;
        worst[6] = worst[6].max(ratio(adv.dot(&mu) - u.dot(&cap), abs_dot_cells(&adv, &mu) + abs_dot_faces(&u, &cap)));
    }
    let s = Suite::Ops;
    Ok(vec![
        check_le(s, "summation by parts <div u,p> = -<u,grad p>", worst[0], 1e-13),
        check_le(s, "skew convection <C(w;v),v> = 0", worst[1], 1e-13),
        check_le(s, "skew flux <T(J;v),v> = 0", worst[2], 1e-13),
        check_le(s, "laplacian symmetry", worst[3], 1e-13),
        check_le(s, "laplacian zero integral", worst[4], 1e-13),
        check_le(s, "viscous operator <Vv,v> = dissipation", worst[5], 1e-12),
        check_le(s, "capillary force adjoint of advection", worst[6], 1e-13),
    ])
}

fn log_params() -> ModelParams {
    ModelParams::constant(1.0, 3.0, 1.0, 1.0, 1.0, PotentialSpec::logarithmic(1.0, 2.0), Variant::Agg)
}

fn ch_problem<'a>(phi_k: &'a ScalarField, v: &'a FaceVectorField, params: &'a ModelParams, ta: &'a TransformA, h: f64) -> ChStepProblem<'a> {
    ChStepProblem {
        phi_k,
        v,
        h,
        params,
        ta,
        mu_shift: None,
        guess: None,
        newton_tol: 1e-13,
        newton_max_iter: 50,
        damping_min: 1e-8,
        lin_tol: 1e-13,
    }
}

/// Largest entrywise difference between the assembled Newton matrix and
/// the matrix-free linearisation on a 4x4 grid, relative to the largest
/// entry; and the directional finite-difference defect.
pub fn ch_jacobian_checks() -> Result<(f64, f64)> {
    let g = MacGrid::new(4, 4, 1.6, 1.6)?;
    let mut params = log_params();
    params.a_coeff = CoefficientProfile::tabulate(33, |s| 1.0 + 0.5 * s * s);
    params.mobility = CoefficientProfile::tabulate(17, |s| 1.2 - 0.3 * s);
    params.m0 = 0.9;
    params.k_max = 1.5;
    let ta = TransformA::new(&params.a_coeff, &params.potential);
    let mut rng = Lcg::new(77);
    let phi_k = random_cells(g, &mut rng, -0.7, 0.7);
    let v = random_faces(g, &mut rng);
    let p = ch_problem(&phi_k, &v, &params, &ta, 0.05);
    let phi = phi_k.map(|s| s + rng.range(-0.1, 0.1));
    let dense = ch::ch_jacobian_dense(&phi, &p)?;
    let n = g.n_cells();
    let scale = dense.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut worst = 0.0f64;
    for c in 0..n {
        let mut e = ScalarField::zeros(g);
        e.data[c] = 1.0;
        let col = ch::ch_jacobian_apply(&phi, &e, &p)?;
        for r in 0..n {
            worst = worst.max((col.data[r] - dense[r][c]).abs() / scale);
        }
    }
    let d = random_cells(g, &mut rng, -1.0, 1.0);
    let eps = 1e-6;
    let rp = ch::ch_residual(&phi.add(&d.scaled(eps)), &p)?;
    let rm = ch::ch_residual(&phi.sub(&d.scaled(eps)), &p)?;
    let fd = rp.sub(&rm).scaled(0.5 / eps);
    let jd = ch::ch_jacobian_apply(&phi, &d, &p)?;
    Ok((worst, fd.sub(&jd).norm() / jd.norm()))
}

/// Newton residual history on a smooth 32x32 state with a large step.
pub fn newton_history() -> Result<Vec<f64>> {
    let g = MacGrid::new(32, 32, 12.8, 12.8)?;
    let params = log_params();
    let ta = TransformA::new(&params.a_coeff, &params.potential);
    let phi_k = ScalarField::from_fn(g, |x, y| 0.6 * (0.49 * x).cos() * (0.245 * y).cos());
    let v = FaceVectorField::zeros(g);
    let res = ch::ch_solve(&ch_problem(&phi_k, &v, &params, &ta, 1.0))?;
    Ok(res.residual_history)
}

/// Residuals below this fraction of the first one sit at the rounding floor
/// and carry no convergence-rate information.
pub const TAIL_FLOOR: f64 = 1e-11;

/// Quadratic-convergence constants `r_{n+1} / r_n^2` over the last three
/// Newton updates, with residuals normalised by the first one. Pairs whose
/// newer residual has reached [`TAIL_FLOOR`] are skipped.
pub fn tail_constants(history: &[f64]) -> Vec<f64> {
    let r0 = history[0];
    let r: Vec<f64> = history.iter().map(|x| x / r0).collect();
    let start = r.len().saturating_sub(4);
    r[start..]
        .windows(2)
        .filter(|w| w[1] > TAIL_FLOOR)
        .map(|w| w[1] / (w[0] * w[0]))
        .collect()
}

pub fn ch_suite() -> Result<Vec<Check>> {
    let s = Suite::Ch;
    let (dense, fd) = ch_jacobian_checks()?;
    let mut out = vec![
        check_le(s, "assembled Jacobian = linearisation (4x4)", dense, 1e-10),
        check_le(s, "Jacobian vs finite differences", fd, 1e-5),
    ];
    let hist = newton_history()?;
    let tail = tail_constants(&hist);
    let c = tail.iter().copied().fold(0.0f64, f64::max);
    let mut chk = check_le(s, "Newton tail r_{n+1}/r_n^2 (normalised)", c, 10.0);
    // at least one measurable pair, and the solve must have converged
    chk.pass &= !tail.is_empty() && hist.len() >= 3;
    out.push(chk);

    // mass and confinement over 20 steps of a sharp profile
    let g = MacGrid::new(32, 4, 12.8, 1.6)?;
    let params = log_params();
    let ta = TransformA::new(&params.a_coeff, &params.potential);
    let v = FaceVectorField::zeros(g);
    let mut phi = ScalarField::from_fn(g, |x, _| 0.95 * (x - 6.4).tanh());
    let m0 = phi.integral();
    let mut drift = 0.0f64;
    let mut maxabs = 0.0f64;
    for _ in 0..20 {
        let r = ch::ch_solve(&ch_problem(&phi, &v, &params, &ta, 0.05))?;
        phi = r.phi;
        drift = drift.max((phi.integral() - m0).abs() / g.area());
        maxabs = maxabs.max(phi.max_abs());
    }
    out.push(check_le(s, "mass drift over 20 steps / |Omega|", drift, 1e-12));
    out.push(check_le(s, "max |phi| over 20 steps", maxabs, 1.0 - 1e-10));
    let uniform = ScalarField::constant(g, 0.2);
    let r = ch::ch_solve(&ch_problem(&uniform, &v, &params, &ta, 0.05))?;
    out.push(check_le(s, "uniform state is a fixed point", r.phi.sub(&uniform).max_abs(), 1e-14));
    Ok(out)
}

struct NsFixture {
    rho_k: ScalarField,
    rho_new: ScalarField,
    phi_k: ScalarField,
    mu: ScalarField,
    jt: FaceVectorField,
    v_k: FaceVectorField,
    v_tr: FaceVectorField,
    params: ModelParams,
}

impl NsFixture {
    fn new(g: MacGrid, variant: Variant, rho2: f64, seed: u64) -> Result<Self> {
        let mut rng = Lcg::new(seed);
        let params = ModelParams::constant(1.0, rho2, 1.0, 1.3, 0.7, PotentialSpec::logarithmic(1.0, 2.0), variant);
        let phi_k = random_cells(g, &mut rng, -0.9, 0.9);
        let phi = phi_k.map(|s| (s + 0.05).min(0.95));
        let mu = random_cells(g, &mut rng, -1.0, 1.0);
        let jt = if variant == Variant::Agg { ns::compute_jtilde(&phi_k, &mu, &params)? } else { FaceVectorField::zeros(g) };
        Ok(NsFixture {
            rho_k: phi_k.map(|s| params.rho_of_phi(s)),
            rho_new: phi.map(|s| params.rho_of_phi(s)),
            phi_k,
            mu,
            jt,
            v_k: random_faces(g, &mut rng),
            v_tr: random_faces(g, &mut rng),
            params,
        })
    }

    fn problem(&self, h: f64) -> NsStepProblem<'_> {
        NsStepProblem {
            rho_k: &self.rho_k,
            rho_new: &self.rho_new,
            phi_k: &self.phi_k,
            mu: &self.mu,
            jtilde: &self.jt,
            v_k: &self.v_k,
            v_transport: &self.v_tr,
            h,
            params: &self.params,
            lin_tol: 1e-12,
            lin_max_iter: 3,
        }
    }
}

/// Worst relative entry difference between the assembled velocity block and
/// the matrix-free momentum operator on a 4x4 grid, for one variant.
pub fn momentum_dense_check(variant: Variant) -> Result<f64> {
    let g = MacGrid::new(4, 4, 1.0, 1.0)?;
    let f = NsFixture::new(g, variant, if variant == Variant::ModelH { 1.0 } else { 3.0 }, 31)?;
    let p = f.problem(0.1);
    let sys = ns::assemble_momentum(&p)?;
    let m = sys.velocity_block();
    let n = m.len();
    let scale = m.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut worst = 0.0f64;
    let mut e = vec![0.0; n];
    for c in 0..n {
        e[c] = 1.0;
        let v = sys.scatter(&e);
        let col = sys.gather(&ns::momentum_apply(&p, &v)?);
        for r in 0..n {
            worst = worst.max((col[r] - m[r][c]).abs() / scale);
        }
        e[c] = 0.0;
    }
    Ok(worst)
}

pub fn ns_suite() -> Result<Vec<Check>> {
    let s = Suite::Ns;
    let mut out = vec![
        check_le(s, "momentum block = operator, agg (4x4)", momentum_dense_check(Variant::Agg)?, 1e-10),
        check_le(s, "momentum block = operator, appendix (4x4)", momentum_dense_check(Variant::Appendix)?, 1e-10),
        check_le(s, "momentum block = operator, matched (4x4)", momentum_dense_check(Variant::ModelH)?, 1e-10),
    ];

    // antisymmetric transport part of the assembled block
    let g = MacGrid::new(4, 4, 1.0, 1.0)?;
    let f = NsFixture::new(g, Variant::Agg, 3.0, 32)?;
    let p = f.problem(0.1);
    let sys = ns::assemble_momentum(&p)?;
    let m = sys.velocity_block();
    let eta = f.phi_k.map(|x| f.params.viscosity.value(x));
    let n = m.len();
    let mut asym = 0.0f64;
    let mut vis_sym = 0.0f64;
    let scale = m.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut vis = vec![vec![0.0; n]; n];
    let mut e = vec![0.0; n];
    for c in 0..n {
        e[c] = 1.0;
        let col = sys.gather(&ops::viscous_apply(&sys.scatter(&e), &eta)?);
        for r in 0..n {
            vis[r][c] = col[r];
        }
        e[c] = 0.0;
    }
    for a in 0..n {
        for b in 0..n {
            vis_sym = vis_sym.max((vis[a][b] - vis[b][a]).abs() / scale);
            if a != b {
                asym = asym.max(((m[a][b] - vis[a][b]) + (m[b][a] - vis[b][a])).abs() / scale);
            }
        }
    }
    out.push(check_le(s, "viscous block symmetric", vis_sym, 1e-13));
    out.push(check_le(s, "transport block antisymmetric", asym, 1e-13));

    // matched densities: AGG assembly equals the constant-density assembly
    let fa = NsFixture::new(g, Variant::Agg, 1.0, 33)?;
    let mut fh = NsFixture::new(g, Variant::Agg, 1.0, 33)?;
    fh.params.variant = Variant::ModelH;
    let a = ns::assemble_momentum(&fa.problem(0.1))?;
    let b = ns::assemble_momentum(&fh.problem(0.1))?;
    let (da, db) = (a.dense(), b.dense());
    let mut diff = 0.0f64;
    for r in 0..da.len() {
        for c in 0..da.len() {
            diff = diff.max((da[r][c] - db[r][c]).abs());
        }
        diff = diff.max((a.rhs[r] - b.rhs[r]).abs());
    }
    out.push(check_le(s, "matched-density assembly = constant-density", diff, 1e-14));

    // incompressibility of a solve
    let g8 = MacGrid::new(8, 8, 1.0, 1.0)?;
    let mut f8 = NsFixture::new(g8, Variant::Agg, 3.0, 34)?;
    f8.v_tr = FaceVectorField::zeros(g8);
    let r = ns::ns_solve(&f8.problem(0.05))?;
    out.push(check_le(s, "max |div v| / ||v|| after solve", r.div_inf / r.v.norm().max(1e-300), 1e-10));
    out.push(check_le(s, "mean of pressure", r.g.mean().abs(), 1e-12));
    Ok(out)
}

fn small_scenario(variant: Variant, rho2: f64) -> Result<Scenario> {
    Ok(Scenario {
        name: "verify".into(),
        grid: MacGrid::new(16, 16, 6.4, 6.4)?,
        initial: InitialCondition::Spinodal { seed: 5, mean: 0.0, amplitude: 0.3 },
        smoothing_sweeps: 2,
        params: ModelParams::constant(1.0, rho2, 1.0, 1.0, 1.0, PotentialSpec::logarithmic(1.0, 2.0), variant),
    })
}

pub fn energy_suite() -> Result<Vec<Check>> {
    let s = Suite::Energy;
    let mut out = Vec::new();
    let cfg = StepperConfig { h: 5e-3, ..Default::default() };
    for (variant, rho2) in [(Variant::Agg, 3.0), (Variant::Appendix, 3.0), (Variant::ModelH, 1.0)] {
        let sc = small_scenario(variant, rho2)?;
        let stepper = Stepper::new(sc.params.clone(), cfg.clone())?;
        let init = stepper.initial_state(sc.initial_phi()?, FaceVectorField::zeros(sc.grid))?;
        let traj = stepper.run(init, 10, |_, _| Ok(()))?;
        let e0 = traj.reports[0].e_tot;
        let eps = audit_eps(&cfg, e0);
        let worst = traj.reports[1..].iter().map(|r| -r.ineq_residual).fold(f64::NEG_INFINITY, f64::max);
        let all_pass = traj.reports[1..].iter().all(|r| audit_energy_inequality(r, eps).pass);
        out.push(Check {
            suite: s,
            name: format!("energy inequality, {} (worst -residual)", variant.name()),
            value: worst,
            threshold: eps,
            pass: all_pass,
        });
        let drift = traj.reports.iter().map(|r| (r.mass - traj.reports[0].mass).abs()).fold(0.0, f64::max);
        out.push(check_le(s, &format!("mass drift / |Omega|, {}", variant.name()), drift / sc.grid.area(), 1e-12));
    }
    let sc = small_scenario(Variant::Agg, 1.0)?;
    let d = studies::compare_matched(&sc, &cfg, 5)?;
    out.push(check_le(s, "matched agg vs constant-density path", d, 1e-12));
    let sc = small_scenario(Variant::Appendix, 1.0)?;
    let a = Stepper::new(sc.params.clone(), cfg.clone())?;
    let b = Stepper::new(studies::matched(&sc.params, 1.0, Variant::ModelH), cfg.clone())?;
    let d = studies::compare_paths(&sc.initial_phi()?, &a, &b, 5)?;
    out.push(check_le(s, "appendix (beta = 0) vs constant-density path", d, 1e-12));
    Ok(out)
}

/// Run the requested suites; an error inside a suite becomes a failed check.
pub fn run_suites(suites: &[Suite]) -> Vec<Check> {
    let mut out = Vec::new();
    for &s in suites {
        match run_suite(s) {
            Ok(c) => out.extend(c),
            Err(e) => out.push(Check {
                suite: s,
                name: format!("suite aborted: {e}"),
                value: f64::NAN,
                threshold: 0.0,
                pass: false,
            }),
        }
    }
    out
}

/// Convenience for callers that want an error when anything fails.
pub fn ensure_all_pass(checks: &[Check]) -> Result<()> {
    let failed: Vec<_> = checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(format!("failed checks: {}", failed.join("; "))))
    }
}
