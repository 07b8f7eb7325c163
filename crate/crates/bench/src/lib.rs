//! Benchmark fixtures: a partly separated state on an `n x n` grid.

use twophase::ch::{self, ChStepProblem};
use twophase::grid::{FaceVectorField, MacGrid};
use twophase::ns::{self, NsStepProblem};
use twophase::scenario::{InitialCondition, Scenario};
use twophase::stepper::Stepper;
use twophase::transform::TransformA;
use twophase::{ModelParams, PotentialSpec, SimState, StepperConfig, Variant};

pub struct Fixture {
    pub params: ModelParams,
    pub ta: TransformA,
    pub stepper: Stepper,
    /// State after a few steps, so velocity and pressure are nonzero.
    pub state: SimState,
}

pub fn fixture(n: usize) -> Fixture {
    let l = 0.4 * n as f64;
    let sc = Scenario {
        name: "bench".into(),
        grid: MacGrid::new(n, n, l, l).expect("grid"),
        initial: InitialCondition::Spinodal { seed: 3, mean: 0.0, amplitude: 0.6 },
        smoothing_sweeps: 3,
        params: ModelParams::constant(1.0, 3.0, 1.0, 1.0, 1.0, PotentialSpec::logarithmic(1.0, 2.0), Variant::Agg),
    };
    let cfg = StepperConfig { h: 2e-3, ..Default::default() };
    let stepper = Stepper::new(sc.params.clone(), cfg).expect("stepper");
    let mut state = stepper
        .initial_state(sc.initial_phi().expect("initial data"), FaceVectorField::zeros(sc.grid))
        .expect("initial state");
    for _ in 0..3 {
        state = stepper.step(&state, 2e-3).expect("warm-up step").0;
    }
    let ta = TransformA::new(&sc.params.a_coeff, &sc.params.potential);
    Fixture { params: sc.params, ta, stepper, state }
}

impl Fixture {
    pub fn ch_problem(&self, h: f64) -> ChStepProblem<'_> {
        ChStepProblem {
            phi_k: &self.state.phi,
            v: &self.state.v,
            h,
            params: &self.params,
            ta: &self.ta,
            mu_shift: None,
            guess: None,
            newton_tol: 1e-12,
            newton_max_iter: 30,
            damping_min: 1e-6,
            lin_tol: 1e-12,
        }
    }

    pub fn solve_ch(&self, h: f64) -> ch::ChStepResult {
        ch::ch_solve(&self.ch_problem(h)).expect("CH solve")
    }

    /// One momentum/continuity solve with the current state as transport field.
    pub fn solve_ns(&self, h: f64, ch_res: &ch::ChStepResult) -> ns::NsStepResult {
        let rho_k = self.state.phi.map(|s| self.params.rho_of_phi(s));
        let rho_new = ch_res.phi.map(|s| self.params.rho_of_phi(s));
        let jt = ns::compute_jtilde(&self.state.phi, &ch_res.mu, &self.params).expect("flux");
        ns::ns_solve(&NsStepProblem {
            rho_k: &rho_k,
            rho_new: &rho_new,
            phi_k: &self.state.phi,
            mu: &ch_res.mu,
            jtilde: &jt,
            v_k: &self.state.v,
            v_transport: &self.state.v,
            h,
            params: &self.params,
            lin_tol: 1e-12,
            lin_max_iter: 3,
        })
        .expect("saddle solve")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_solves() {
        let f = fixture(8);
        let c = f.solve_ch(2e-3);
        let r = f.solve_ns(2e-3, &c);
        assert!(r.v.all_finite() && f.state.step == 3);
    }
}
