//! Multi-run studies: matched-density comparison and temporal
//! self-convergence.

use crate::error::{Error, Result};
use crate::grid::{FaceVectorField, ScalarField};
use crate::model::{ModelParams, Variant};
use crate::scenario::Scenario;
use crate::stepper::{SimState, Stepper, StepperConfig};

/// Largest pointwise difference between two states over `phi`, `mu`, `v`.
pub fn state_discrepancy(a: &SimState, b: &SimState) -> f64 {
    let d = |x: &[f64], y: &[f64]| x.iter().zip(y).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    d(&a.phi.data, &b.phi.data).max(d(&a.mu.data, &b.mu.data)).max(d(&a.v.x, &b.v.x)).max(d(&a.v.y, &b.v.y))
}

/// Run two parameter sets side by side from the same initial data and
/// return the largest discrepancy seen at any step.
pub fn compare_paths(phi0: &ScalarField, a: &Stepper, b: &Stepper, steps: usize) -> Result<f64> {
    let v0 = FaceVectorField::zeros(phi0.grid);
    let mut sa = a.initial_state(phi0.clone(), v0.clone())?;
    let mut sb = b.initial_state(phi0.clone(), v0)?;
    let mut worst = state_discrepancy(&sa, &sb);
    for _ in 0..steps {
        sa = a.step(&sa, a.cfg.h)?.0;
        sb = b.step(&sb, b.cfg.h)?.0;
        worst = worst.max(state_discrepancy(&sa, &sb));
    }
    Ok(worst)
}

/// Parameters with both densities set to `rho` and the given variant.
pub fn matched(params: &ModelParams, rho: f64, variant: Variant) -> ModelParams {
    ModelParams { rho1: rho, rho2: rho, variant, ..params.clone() }
}

/// AGG with matched densities against the constant-density path; the
/// density used is `rho1` of the scenario.
pub fn compare_matched(scenario: &Scenario, cfg: &StepperConfig, steps: usize) -> Result<f64> {
    let rho = scenario.params.rho1;
    let agg = Stepper::new(matched(&scenario.params, rho, Variant::Agg), cfg.clone())?;
    let mh = Stepper::new(matched(&scenario.params, rho, Variant::ModelH), cfg.clone())?;
    compare_paths(&scenario.initial_phi()?, &agg, &mh, steps)
}

/// Outcome of a time-refinement study.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub final_time: f64,
    pub h_ref: f64,
    /// `(h, ||phi_h(T) - phi_ref(T)||_h)` from coarse to fine.
    pub errors: Vec<(f64, f64)>,
    /// `log2(e_l / e_{l+1})` for consecutive levels.
    pub pairwise_orders: Vec<f64>,
    /// Least-squares slope of `log e` against `log h`.
    pub fitted_order: f64,
}

fn run_to(stepper: &Stepper, phi0: &ScalarField, steps: usize, h: f64) -> Result<SimState> {
    let mut s = stepper.initial_state(phi0.clone(), FaceVectorField::zeros(phi0.grid))?;
    for _ in 0..steps {
        s = stepper.step(&s, h)?.0;
    }
    Ok(s)
}

/// Runs with `h, h/2, ..., h/2^(levels-1)` to `T = steps * h`, compared to a
/// reference with `h/2^(levels+1)`.
pub fn convergence_study(scenario: &Scenario, cfg: &StepperConfig, steps: usize, levels: usize) -> Result<ConvergenceStudy> {
    if levels < 2 {
        return Err(Error::Validation("a convergence study needs at least 2 levels".into()));
    }
    if steps == 0 {
        return Err(Error::Validation("a convergence study needs at least one coarse step".into()));
    }
    let stepper = Stepper::new(scenario.params.clone(), cfg.clone())?;
    let phi0 = scenario.initial_phi()?;
    let h0 = cfg.h;
    let ref_factor = 1usize << (levels + 1);
    let h_ref = h0 / ref_factor as f64;
    let reference = run_to(&stepper, &phi0, steps * ref_factor, h_ref)?;
    let mut errors = Vec::with_capacity(levels);
    for l in 0..levels {
        let k = 1usize << l;
        let h = h0 / k as f64;
        let s = run_to(&stepper, &phi0, steps * k, h)?;
        errors.push((h, s.phi.sub(&reference.phi).norm()));
    }
    let pairwise_orders = errors.windows(2).map(|w| (w[0].1 / w[1].1).log2()).collect();
    let xs: Vec<f64> = errors.iter().map(|e| e.0.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.1.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(ConvergenceStudy { final_time: h0 * steps as f64, h_ref, errors, pairwise_orders, fitted_order: sxy / sxx })
}
