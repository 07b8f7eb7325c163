//! Homogeneous free energy densities.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind {
    /// `theta/2 ((1+s) ln(1+s) + (1-s) ln(1-s)) - theta_c/2 s^2` on `[-1, 1]`.
    Logarithmic { theta: f64, theta_c: f64 },
    /// Smooth `scale (1 - s^2)^2 / 4`. Not singular at ±1; used for smooth
    /// convergence studies only, so confinement checks do not apply to it.
    PolynomialDoubleWell { scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
}

/// `x ln x` with the continuous extension `0 ln 0 = 0`.
fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

impl PotentialSpec {
    pub fn logarithmic(theta: f64, theta_c: f64) -> Self {
        PotentialSpec {
            kind: PotentialKind::Logarithmic { theta, theta_c },
        }
    }

    pub fn double_well(scale: f64) -> Self {
        PotentialSpec {
            kind: PotentialKind::PolynomialDoubleWell { scale },
        }
    }

    pub fn is_singular(&self) -> bool {
        matches!(self.kind, PotentialKind::Logarithmic { .. })
    }

    /// Convexity defect: `psi'' >= -kappa` everywhere on the domain.
    pub fn kappa(&self) -> f64 {
        match self.kind {
            PotentialKind::Logarithmic { theta, theta_c } => (theta_c - theta).max(0.0),
            PotentialKind::PolynomialDoubleWell { scale } => scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            PotentialKind::Logarithmic { theta, theta_c } => {
                if !(theta > 0.0) || !theta.is_finite() {
                    return Err(Error::Validation(format!("theta must be positive, got {theta}")));
                }
                if !(theta_c >= 0.0) || !theta_c.is_finite() {
                    return Err(Error::Validation(format!(
                        "theta_c must be non-negative, got {theta_c}"
                    )));
                }
            }
            PotentialKind::PolynomialDoubleWell { scale } => {
                if !(scale > 0.0) || !scale.is_finite() {
                    return Err(Error::Validation(format!(
                        "double-well scale must be positive, got {scale}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `psi(s)`; defined on the closed interval for the logarithmic potential.
    pub fn psi(&self, s: f64) -> Result<f64> {
        match self.kind {
            PotentialKind::Logarithmic { theta, theta_c } => {
                if !(s.abs() <= 1.0) {
                    return Err(Error::Domain { what: "psi needs |s| <= 1", value: s });
                }
                Ok(0.5 * theta * (xlogx(1.0 + s) + xlogx(1.0 - s)) - 0.5 * theta_c * s * s)
            }
            PotentialKind::PolynomialDoubleWell { scale } => {
                let w = 1.0 - s * s;
                Ok(0.25 * scale * w * w)
            }
        }
    }

    pub fn dpsi(&self, s: f64) -> Result<f64> {
        match self.kind {
            PotentialKind::Logarithmic { theta, theta_c } => {
                if !(s.abs() < 1.0) {
                    return Err(Error::Domain { what: "psi' needs |s| < 1", value: s });
                }
                Ok(theta * s.atanh() - theta_c * s)
            }
            PotentialKind::PolynomialDoubleWell { scale } => Ok(-scale * s * (1.0 - s * s)),
        }
    }

    pub fn d2psi(&self, s: f64) -> Result<f64> {
        match self.kind {
            PotentialKind::Logarithmic { theta, theta_c } => {
                if !(s.abs() < 1.0) {
                    return Err(Error::Domain { what: "psi'' needs |s| < 1", value: s });
                }
                Ok(theta / ((1.0 - s) * (1.0 + s)) - theta_c)
            }
            PotentialKind::PolynomialDoubleWell { scale } => Ok(scale * (3.0 * s * s - 1.0)),
        }
    }

    /// `(psi, psi', psi'')` at an interior point.
    pub fn eval(&self, s: f64) -> Result<(f64, f64, f64)> {
        Ok((self.psi(s)?, self.dpsi(s)?, self.d2psi(s)?))
    }

    /// Derivative of the convex part `psi_0 = psi + kappa s^2 / 2`.
    pub fn psi0_prime(&self, s: f64) -> Result<f64> {
        Ok(self.dpsi(s)? + self.kappa() * s)
    }

    /// Lower bound of `psi` on its domain (used for energy floor checks).
    pub fn min_value(&self) -> f64 {
        match self.kind {
            PotentialKind::PolynomialDoubleWell { .. } => 0.0,
            PotentialKind::Logarithmic { .. } => {
                let n = 20_001;
                (0..n)
                    .map(|k| -1.0 + 2.0 * k as f64 / (n - 1) as f64)
                    .filter_map(|s| self.psi(s).ok())
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// Pointwise free energy `psi(phi) + |grad A(phi)|^2 / 2`.
pub fn free_energy_density(phi: f64, grad_a_phi_sq: f64, spec: &PotentialSpec) -> Result<f64> {
    if spec.is_singular() && !(phi.abs() <= 1.0) {
        return Err(Error::Domain { what: "free energy needs |phi| <= 1", value: phi });
    }
    Ok(spec.psi(phi)? + 0.5 * grad_a_phi_sq)
}
