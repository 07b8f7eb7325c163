//! Initial data.
//!
//! The spinodal initializer uses a fixed 64-bit linear congruential generator
//! so that fields are reproducible across platforms and languages:
//!
//! ```text
//! state <- state * 6364136223846793005 + 1442695040888963407   (mod 2^64)
//! u      = (state >> 11) / 2^53                                 (in [0, 1))
//! phi    = mean + amplitude * (2u - 1)
//! ```
//!
//! The state starts at `seed` and is advanced once before every draw; cells
//! are visited in storage order (x fastest).

use crate::error::{Error, Result};
use crate::grid::{FaceVectorField, MacGrid, ScalarField};
use crate::model::ModelParams;
use crate::ops;

/// Margin kept between generated data and the pure phases.
pub const PHASE_MARGIN: f64 = 1e-6;

/// Most explicit smoothing sweeps accepted.
pub const MAX_SMOOTHING_SWEEPS: usize = 5;

/// 64-bit linear congruential generator.
#[derive(Debug, Clone)]
pub struct Lcg {
    state: u64,
}

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg { state: seed }
    }

    /// Uniform draw in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.state = self.state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.state >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Uniform noise of the given amplitude around `mean`.
    Spinodal { seed: u64, mean: f64, amplitude: f64 },
    /// Disc of phase +1 in a matrix of phase -1, tanh profile of `width`.
    Bubble { center_x: f64, center_y: f64, radius: f64, width: f64 },
    /// Phase +1 above `height`, phase -1 below.
    Stratified { height: f64, width: f64 },
    /// `mean + amplitude cos(pi x / lx) cos(2 pi y / ly)`, smooth and
    /// compatible with the Neumann condition.
    Cosine { mean: f64, amplitude: f64 },
}

impl InitialCondition {
    pub fn kind_name(&self) -> &'static str {
        match self {
            InitialCondition::Spinodal { .. } => "spinodal",
            InitialCondition::Bubble { .. } => "bubble",
            InitialCondition::Stratified { .. } => "stratified",
            InitialCondition::Cosine { .. } => "cosine",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            InitialCondition::Spinodal { seed, .. } => Some(*seed),
            _ => None,
        }
    }
}

/// Grid, initial data and physical parameters of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub grid: MacGrid,
    pub initial: InitialCondition,
    pub smoothing_sweeps: usize,
    pub params: ModelParams,
}

impl Scenario {
    /// Initial order parameter, checked to lie within `1 - 1e-6` of the
    /// pure phases with mean in `(-1, 1)`.
    pub fn initial_phi(&self) -> Result<ScalarField> {
        if self.smoothing_sweeps > MAX_SMOOTHING_SWEEPS {
            return Err(Error::Validation(format!(
                "at most {MAX_SMOOTHING_SWEEPS} smoothing sweeps, got {}",
                self.smoothing_sweeps
            )));
        }
        let g = self.grid;
        let cap = 1.0 - PHASE_MARGIN;
        let mut phi = match self.initial {
            InitialCondition::Spinodal { seed, mean, amplitude } => {
                let mut rng = Lcg::new(seed);
                let data = (0..g.n_cells()).map(|_| mean + amplitude * (2.0 * rng.next_f64() - 1.0)).collect();
                ScalarField { grid: g, data }
            }
            InitialCondition::Bubble { center_x, center_y, radius, width } => {
                if !(width > 0.0) {
                    return Err(Error::Validation(format!("interface width must be positive, got {width}")));
                }
                ScalarField::from_fn(g, |x, y| {
                    let r = ((x - center_x).powi(2) + (y - center_y).powi(2)).sqrt();
                    cap * ((radius - r) / width).tanh()
                })
            }
            InitialCondition::Stratified { height, width } => {
                if !(width > 0.0) {
                    return Err(Error::Validation(format!("interface width must be positive, got {width}")));
                }
                ScalarField::from_fn(g, |_, y| cap * ((y - height) / width).tanh())
            }
            InitialCondition::Cosine { mean, amplitude } => ScalarField::from_fn(g, |x, y| {
                mean + amplitude
                    * (std::f64::consts::PI * x / g.lx).cos()
                    * (2.0 * std::f64::consts::PI * y / g.ly).cos()
            }),
        };
        // explicit heat sweeps, stable for tau <= min(h)^2 / 4
        let tau = 0.2 * g.hx.min(g.hy).powi(2);
        let unit = FaceVectorField::constant(g, 1.0, 1.0);
        for _ in 0..self.smoothing_sweeps {
            let lap = ops::laplace_neumann(&phi, &unit)?;
            phi.axpy(tau, &lap);
        }
        if let Some(&bad) = phi.data.iter().find(|s| !(s.abs() <= cap)) {
            return Err(Error::Validation(format!(
                "initial phi value {bad} violates |phi| <= 1 - {PHASE_MARGIN:e}"
            )));
        }
        let m = phi.mean();
        if !(m > -1.0 && m < 1.0) {
            return Err(Error::Validation(format!("initial mean {m} must lie in (-1, 1)")));
        }
        Ok(phi)
    }
}
