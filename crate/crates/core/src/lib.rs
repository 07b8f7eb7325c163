//! Diffuse-interface simulation of two incompressible fluids with different
//! densities on a staggered grid.
//!
//! The model couples a variable-density Navier–Stokes system (with the
//! relative mass flux `J = -(rho2 - rho1)/2 * m(phi) grad mu`) to a
//! Cahn–Hilliard equation with a singular logarithmic potential. Each time
//! step is fully implicit and built so that the discrete total energy obeys
//! an exact dissipation inequality; the [`stepper`] audits it every step.
//!
//! Layout:
//! - [`model`], [`potential`], [`transform`]: pointwise coefficients, the free
//!   energy density and the gradient-coefficient transform `A`.
//! - [`grid`], [`ops`]: MAC grid, fields, and summation-by-parts operators.
//! - [`ch`], [`ns`]: the two implicit sub-solvers.
//! - [`stepper`]: coupled time step, energy bookkeeping and trajectories.
//! - [`scenario`], [`config`], [`output`], [`verify`]: scenarios, configuration,
//!   persistence and invariant suites used by the command line.
//! - [`studies`]: matched-density comparison and time-refinement study.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too; dense
// matrix loops read better with explicit indices.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod ch;
pub mod config;
pub mod error;
pub mod grid;
pub mod model;
pub mod ns;
pub mod ops;
pub mod output;
pub mod potential;
pub mod scenario;
mod sparse;
pub mod stepper;
pub mod studies;
pub mod transform;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{FaceVectorField, MacGrid, ScalarField};
pub use model::{CoefficientProfile, ModelParams, Variant};
pub use potential::PotentialSpec;
pub use stepper::{EnergyReport, SimState, StepperConfig};
pub use transform::TransformA;
