//! Coupled time step, energy bookkeeping and trajectory driver.
//!
//! One step alternates a Cahn–Hilliard solve (with the lagged velocity) and a
//! momentum solve (with the new `phi`, `mu`) until the combined relative
//! update of `(v, phi, mu)` falls below `outer_tol`. At that point the fully
//! implicit system holds and the discrete energy inequality
//!
//! ```text
//! E(new) + int rho_k |v - v_k|^2/2 + int |grad A(phi) - grad A(phi_k)|^2/2
//!        + h int 2 eta |D v|^2 + h int m |grad mu|^2  <=  E(old)
//! ```
//!
//! is satisfied up to the convexity slack of the potential, which is never
//! negative. Every step reports the slack as `ineq_residual`.

use crate::ch::{self, ChStepProblem, ChemPotDiagnostics};
use crate::error::{Error, Result};
use crate::grid::{FaceVectorField, ScalarField};
use crate::model::{ModelParams, Variant};
use crate::ns::{self, NsStepProblem};
use crate::ops;
use crate::transform::TransformA;

/// Maximal number of time-step halvings per step.
pub const MAX_RETRIES: usize = 5;

/// `(t, v, phi, mu, g)` at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub step: usize,
    pub v: FaceVectorField,
    pub phi: ScalarField,
    pub mu: ScalarField,
    pub g: ScalarField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig {
    pub h: f64,
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    pub under_relaxation: f64,
    /// Fixed audit tolerance; derived from the initial energy when absent.
    pub audit_eps: Option<f64>,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub damping_min: f64,
    pub lin_tol: f64,
    pub lin_max_iter: usize,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            h: 1e-3,
            outer_tol: 1e-10,
            outer_max_iter: 50,
            under_relaxation: 0.7,
            audit_eps: None,
            newton_tol: 1e-12,
            newton_max_iter: 30,
            damping_min: 1e-6,
            lin_tol: 1e-12,
            lin_max_iter: 3,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64, name: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::Validation(format!("{name} must be positive, got {x}")))
            }
        };
        pos(self.h, "time step")?;
        pos(self.outer_tol, "outer_tol")?;
        pos(self.newton_tol, "newton_tol")?;
        pos(self.damping_min, "damping_min")?;
        pos(self.lin_tol, "lin_tol")?;
        if !(self.under_relaxation > 0.0 && self.under_relaxation <= 1.0) {
            return Err(Error::Validation(format!(
                "under_relaxation must lie in (0, 1], got {}",
                self.under_relaxation
            )));
        }
        if self.outer_max_iter == 0 || self.newton_max_iter == 0 {
            return Err(Error::Validation("iteration limits must be at least 1".into()));
        }
        if let Some(e) = self.audit_eps {
            pos(e, "audit_eps")?;
        }
        Ok(())
    }
}

/// Per-step energy accounting. Row 0 of a trajectory carries the initial
/// energies and zero dissipation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub step: usize,
    pub time: f64,
    pub h: f64,
    pub e_kin: f64,
    pub e_free: f64,
    pub e_tot: f64,
    pub visc_diss: f64,
    pub mob_diss: f64,
    pub inertia_defect: f64,
    pub transform_defect: f64,
    pub ineq_residual: f64,
    pub mass: f64,
    pub min_phi: f64,
    pub max_phi: f64,
    pub div_v_inf: f64,
    pub outer_iters: usize,
    pub newton_iters: usize,
    pub lin_iters: usize,
    pub diagnostics: ChemPotDiagnostics,
}

/// Audit verdict for one report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Audit {
    pub pass: bool,
    pub residual: f64,
    pub eps: f64,
}

/// `max(1e-10 |E0|, 10 outer_tol |E0|)`, or the configured override.
pub fn audit_eps(cfg: &StepperConfig, e_tot0: f64) -> f64 {
    cfg.audit_eps.unwrap_or_else(|| (1e-10 * e_tot0.abs()).max(10.0 * cfg.outer_tol * e_tot0.abs()))
}

/// Pass iff `ineq_residual >= -eps`.
pub fn audit_energy_inequality(report: &EnergyReport, eps: f64) -> Audit {
    Audit { pass: report.ineq_residual >= -eps, residual: report.ineq_residual, eps }
}

/// `beta |v|^2 / 2` at cells.
pub fn appendix_chempot_term(v: &FaceVectorField, params: &ModelParams) -> ScalarField {
    ops::kinetic_density(v).scaled(params.beta())
}

/// `(E_kin, E_free, E_tot)`.
pub fn total_energy(state: &SimState, params: &ModelParams, ta: &TransformA) -> Result<(f64, f64, f64)> {
    let rho = state.phi.map(|s| params.rho_of_phi(s));
    let rf = ns::face_density(&rho);
    let e_kin = 0.5 * state.v.hadamard(&rf).dot(&state.v);
    let e_free = ch::free_energy(&state.phi, ta, &params.potential)?;
    Ok((e_kin, e_free, e_kin + e_free))
}

/// Stepper bound to one parameter set.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub params: ModelParams,
    pub ta: TransformA,
    pub cfg: StepperConfig,
}

/// Trajectory summary.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub reports: Vec<EnergyReport>,
    pub final_state: SimState,
    /// Time step in use at the end (after any reductions).
    pub h: f64,
    pub retries: usize,
}

fn rel_update(pairs: &[(f64, f64)]) -> f64 {
    let num: f64 = pairs.iter().map(|p| p.0).sum();
    let den: f64 = pairs.iter().map(|p| p.1).sum();
    if num == 0.0 {
        0.0
    } else {
        (num / den.max(f64::MIN_POSITIVE)).sqrt()
    }
}

impl Stepper {
    pub fn new(params: ModelParams, cfg: StepperConfig) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        let ta = TransformA::new(&params.a_coeff, &params.potential);
        Ok(Stepper { params, ta, cfg })
    }

    /// State at `t = 0` with `mu_0` from the secant form at `phi = phi_k = phi_0`.
    pub fn initial_state(&self, phi0: ScalarField, v0: FaceVectorField) -> Result<SimState> {
        ch::check_admissible(&phi0, &self.params.potential)?;
        let mut mu = ch::mu_from_phi(&phi0, &phi0, &self.ta, &self.params.potential)?;
        if self.params.variant == Variant::Appendix {
            mu.axpy(-1.0, &appendix_chempot_term(&v0, &self.params));
        }
        let g = ScalarField::zeros(phi0.grid);
        Ok(SimState { t: 0.0, step: 0, v: v0, phi: phi0, mu, g })
    }

    /// Report row for the initial state.
    pub fn initial_report(&self, state: &SimState) -> Result<EnergyReport> {
        let (e_kin, e_free, e_tot) = total_energy(state, &self.params, &self.ta)?;
        Ok(EnergyReport {
            step: state.step,
            time: state.t,
            h: 0.0,
            e_kin,
            e_free,
            e_tot,
            visc_diss: 0.0,
            mob_diss: 0.0,
            inertia_defect: 0.0,
            transform_defect: 0.0,
            ineq_residual: 0.0,
            mass: state.phi.integral(),
            min_phi: state.phi.min(),
            max_phi: state.phi.max(),
            div_v_inf: ops::div_faces(&state.v).max_abs(),
            outer_iters: 0,
            newton_iters: 0,
            lin_iters: 0,
            diagnostics: ch::chempot_diagnostics(&state.phi, &state.mu, &self.ta, &self.params.potential)?,
        })
    }

    /// One coupled step of size `h`.
    pub fn step(&self, state: &SimState, h: f64) -> Result<(SimState, EnergyReport)> {
        let cfg = &self.cfg;
        let params = &self.params;
        let g = state.phi.grid;
        let omega = cfg.under_relaxation;
        let rho_k = state.phi.map(|s| params.rho_of_phi(s));
        let zero_faces = FaceVectorField::zeros(g);

        let mut v_tr = state.v.clone();
        let mut prev_phi = state.phi.clone();
        let mut prev_mu = state.mu.clone();
        let (mut newton_iters, mut lin_iters) = (0, 0);
        let mut update = f64::INFINITY;

        for outer in 1..=cfg.outer_max_iter {
            let shift = (params.variant == Variant::Appendix).then(|| appendix_chempot_term(&v_tr, params));
            let chp = ChStepProblem {
                phi_k: &state.phi,
                v: &v_tr,
                h,
                params,
                ta: &self.ta,
                mu_shift: shift.as_ref(),
                guess: Some(&prev_phi),
                newton_tol: cfg.newton_tol,
                newton_max_iter: cfg.newton_max_iter,
                damping_min: cfg.damping_min,
                lin_tol: cfg.lin_tol,
            };
            let chr = ch::ch_solve(&chp)?;
            newton_iters += chr.newton_iters;
            lin_iters += chr.lin_iters;

            let rho_new = chr.phi.map(|s| params.rho_of_phi(s));
            let jt = match params.variant {
                Variant::Agg => ns::compute_jtilde(&state.phi, &chr.mu, params)?,
                _ => zero_faces.clone(),
            };
            let nsp = NsStepProblem {
                rho_k: &rho_k,
                rho_new: &rho_new,
                phi_k: &state.phi,
                mu: &chr.mu,
                jtilde: &jt,
                v_k: &state.v,
                v_transport: &v_tr,
                h,
                params,
                lin_tol: cfg.lin_tol,
                lin_max_iter: cfg.lin_max_iter,
            };
            let nsr = ns::ns_solve(&nsp)?;
            lin_iters += nsr.lin_iters;

            let dv = nsr.v.sub(&v_tr);
            let dphi = chr.phi.sub(&prev_phi);
            let dmu = chr.mu.sub(&prev_mu);
            update = rel_update(&[
                (dv.dot(&dv), nsr.v.dot(&nsr.v)),
                (dphi.dot(&dphi), chr.phi.dot(&chr.phi)),
                (dmu.dot(&dmu), chr.mu.dot(&chr.mu)),
            ]);
            if update <= cfg.outer_tol {
                let new_state = SimState {
                    t: state.t + h,
                    step: state.step + 1,
                    v: nsr.v,
                    phi: chr.phi,
                    mu: chr.mu,
                    g: nsr.g,
                };
                let report = self.report(state, &new_state, &rho_k, h, outer, newton_iters, lin_iters, nsr.div_inf)?;
                return Ok((new_state, report));
            }
            let mut next = nsr.v.scaled(omega);
            next.axpy(1.0 - omega, &v_tr);
            v_tr = next;
            prev_phi = chr.phi;
            prev_mu = chr.mu;
        }
        Err(Error::OuterNoConvergence { iters: cfg.outer_max_iter, update })
    }

    #[allow(clippy::too_many_arguments)]
    fn report(
        &self,
        old: &SimState,
        new: &SimState,
        rho_k: &ScalarField,
        h: f64,
        outer_iters: usize,
        newton_iters: usize,
        lin_iters: usize,
        div_v_inf: f64,
    ) -> Result<EnergyReport> {
        let params = &self.params;
        let (_, _, e_old) = total_energy(old, params, &self.ta)?;
        let (e_kin, e_free, e_tot) = total_energy(new, params, &self.ta)?;
        let rho_new = new.phi.map(|s| params.rho_of_phi(s));
        let kin = ns::kinetic_terms(&new.v, &old.v, rho_k, &rho_new);
        let eta = old.phi.map(|s| params.viscosity.value(s));
        let visc_diss = h * ops::strain_dissipation(&new.v, &eta)?;
        let gmu = ops::grad_cells(&new.mu);
        let mob_diss = h * gmu.hadamard(&ch::mobility_faces(&old.phi, params)).dot(&gmu);
        let ga = ops::grad_cells(&ch::transform_field(&new.phi, &self.ta)?)
            .sub(&ops::grad_cells(&ch::transform_field(&old.phi, &self.ta)?));
        let transform_defect = 0.5 * ga.dot(&ga);
        let ineq_residual = e_old - e_tot - visc_diss - mob_diss - kin.inertia_defect - transform_defect;
        Ok(EnergyReport {
            step: new.step,
            time: new.t,
            h,
            e_kin,
            e_free,
            e_tot,
            visc_diss,
            mob_diss,
            inertia_defect: kin.inertia_defect,
            transform_defect,
            ineq_residual,
            mass: new.phi.integral(),
            min_phi: new.phi.min(),
            max_phi: new.phi.max(),
            div_v_inf,
            outer_iters,
            newton_iters,
            lin_iters,
            diagnostics: ch::chempot_diagnostics(&new.phi, &new.mu, &self.ta, &params.potential)?,
        })
    }

    /// Advance `n_steps` steps. A failing step is retried with half the time
    /// step, at most [`MAX_RETRIES`] times; the reduced step is kept for the
    /// remainder of the run. `observe` sees the initial state and every
    /// accepted step.
    pub fn run(
        &self,
        initial: SimState,
        n_steps: usize,
        mut observe: impl FnMut(&SimState, &EnergyReport) -> Result<()>,
    ) -> Result<Trajectory> {
        let mut state = initial;
        let first = self.initial_report(&state)?;
        observe(&state, &first)?;
        let mut reports = vec![first];
        let mut h = self.cfg.h;
        let mut total_retries = 0;
        for _ in 0..n_steps {
            let mut retries = 0;
            let (next, report) = loop {
                match self.step(&state, h) {
                    Ok(ok) => break ok,
                    Err(e) if e.is_step_failure() && retries < MAX_RETRIES => {
                        retries += 1;
                        h *= 0.5;
                    }
                    Err(e) if e.is_step_failure() => {
                        return Err(Error::AbortedAfterRetries { step: state.step + 1, retries, source: Box::new(e) });
                    }
                    Err(e) => return Err(e),
                }
            };
            total_retries += retries;
            observe(&next, &report)?;
            reports.push(report);
            state = next;
        }
        Ok(Trajectory { reports, final_state: state, h, retries: total_retries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::MacGrid;
    use crate::potential::PotentialSpec;

    fn stepper(variant: Variant, rho2: f64) -> Stepper {
        let params = ModelParams::constant(1.0, rho2, 1.0, 1.0, 1.0, PotentialSpec::logarithmic(1.0, 2.0), variant);
        Stepper::new(params, StepperConfig { h: 1e-2, ..Default::default() }).unwrap()
    }

    fn bumpy(g: MacGrid) -> ScalarField {
        ScalarField::from_fn(g, |x, y| 0.3 * (1.1 * x).cos() * (0.8 * y).cos() + 0.2 * (0.6 * x + 0.3).sin())
    }

    #[test]
    fn uniform_state_is_fixed_point() {
        let s = stepper(Variant::Agg, 3.0);
        let g = MacGrid::new(8, 8, 3.2, 3.2).unwrap();
        let st = s.initial_state(ScalarField::constant(g, 0.1), FaceVectorField::zeros(g)).unwrap();
        let traj = s.run(st.clone(), 10, |_, _| Ok(())).unwrap();
        assert_eq!(traj.reports.len(), 11);
        for r in &traj.reports[1..] {
            assert_eq!(r.ineq_residual, 0.0);
        }
        assert_eq!(traj.final_state.phi, st.phi);
        assert_eq!(traj.final_state.v.max_abs(), 0.0);
    }

    #[test]
    fn energy_inequality_holds_for_all_variants() {
        let g = MacGrid::new(12, 12, 4.8, 4.8).unwrap();
        for (variant, rho2) in [(Variant::Agg, 3.0), (Variant::Appendix, 3.0), (Variant::ModelH, 1.0)] {
            let s = stepper(variant, rho2);
            let st = s.initial_state(bumpy(g), FaceVectorField::zeros(g)).unwrap();
            let traj = s.run(st, 5, |_, _| Ok(())).unwrap();
            let e0 = traj.reports[0].e_tot;
            let eps = audit_eps(&s.cfg, e0);
            for w in traj.reports.windows(2) {
                let r = &w[1];
                assert!(audit_energy_inequality(r, eps).pass, "{variant:?}: {r:?}");
                assert!(r.e_tot <= w[0].e_tot + eps);
                assert!(r.visc_diss >= 0.0 && r.mob_diss >= 0.0);
                assert!((r.mass - traj.reports[0].mass).abs() < 1e-12 * g.area());
            }
            assert!(traj.final_state.v.max_abs() > 0.0 || variant == Variant::ModelH);
        }
    }

    #[test]
    fn audit_fails_on_perturbed_report() {
        let s = stepper(Variant::Agg, 3.0);
        let g = MacGrid::new(8, 8, 3.2, 3.2).unwrap();
        let st = s.initial_state(bumpy(g), FaceVectorField::zeros(g)).unwrap();
        let (_, mut r) = s.step(&st, 1e-2).unwrap();
        assert!(audit_energy_inequality(&r, 1e-10).pass);
        r.e_kin += 1.0;
        r.ineq_residual -= 1.0;
        assert!(!audit_energy_inequality(&r, 1e-10).pass);
    }

    #[test]
    fn appendix_term_examples() {
        let g = MacGrid::new(4, 4, 1.0, 1.0).unwrap();
        let p = ModelParams::constant(1.0, 3.0, 1.0, 1.0, 1.0, PotentialSpec::logarithmic(1.0, 2.0), Variant::Appendix);
        assert_eq!(appendix_chempot_term(&FaceVectorField::zeros(g), &p).max_abs(), 0.0);
        // uniform |v| = 2 along x on every face, beta = 1: beta |v|^2/2 = 2
        let v = FaceVectorField::constant(g, 2.0, 0.0);
        let t = appendix_chempot_term(&v, &p);
        assert!(t.data.iter().all(|&x| (x - 2.0).abs() < 1e-15));
        let matched = ModelParams { rho2: 1.0, ..p };
        assert_eq!(appendix_chempot_term(&v, &matched).max_abs(), 0.0);
    }

    #[test]
    fn total_energy_of_symmetric_rest_state() {
        let s = Stepper::new(
            ModelParams::constant(1.0, 1.0, 1.0, 1.0, 1.0, PotentialSpec::logarithmic(1.0, 1.0), Variant::Agg),
            StepperConfig::default(),
        )
        .unwrap();
        let g = MacGrid::new(4, 4, 1.0, 1.0).unwrap();
        let st = s.initial_state(ScalarField::zeros(g), FaceVectorField::zeros(g)).unwrap();
        assert_eq!(total_energy(&st, &s.params, &s.ta).unwrap(), (0.0, 0.0, 0.0));
        let mut moving = st.clone();
        moving.v = FaceVectorField::constant(g, 1.0, 0.5);
        moving.v.zero_boundary();
        let (k1, _, _) = total_energy(&moving, &s.params, &s.ta).unwrap();
        moving.v = moving.v.scaled(2.0);
        let (k2, _, _) = total_energy(&moving, &s.params, &s.ta).unwrap();
        assert!((k2 - 4.0 * k1).abs() < 1e-14);
    }

    #[test]
    fn retry_halves_the_step() {
        let mut s = stepper(Variant::Agg, 3.0);
        // a single outer iteration cannot converge for a nontrivial state
        s.cfg.outer_max_iter = 1;
        let g = MacGrid::new(8, 8, 3.2, 3.2).unwrap();
        let st = s.initial_state(bumpy(g), FaceVectorField::zeros(g)).unwrap();
        match s.run(st, 1, |_, _| Ok(())) {
            Err(Error::AbortedAfterRetries { retries, .. }) => assert_eq!(retries, MAX_RETRIES),
            other => panic!("{other:?}"),
        }
    }
}
