//! Physical parameters and coefficient profiles.

use crate::error::{Error, Result};
use crate::potential::PotentialSpec;

/// Which member of the model family a run integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Non-matched densities with the relative mass flux in the momentum equation.
    Agg,
    /// The related model whose chemical potential carries `beta |v|^2 / 2`
    /// and whose momentum equation carries `|v|^2/2 grad rho` instead of the flux terms.
    Appendix,
    /// Matched-density reference path (no relative flux, constant density).
    /// Requires `rho1 == rho2`.
    ModelH,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Agg => "agg",
            Variant::Appendix => "appendix",
            Variant::ModelH => "model_h",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "agg" => Some(Variant::Agg),
            "appendix" => Some(Variant::Appendix),
            "model_h" => Some(Variant::ModelH),
            _ => None,
        }
    }
}

/// A coefficient `c(s)` on `[-1, 1]`, extended by its boundary values outside.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientProfile {
    Constant(f64),
    /// Samples on a uniform ladder over `[-1, 1]` (first sample at -1, last at 1),
    /// interpolated by C¹ cubic Hermite splines.
    SmoothTable(Vec<f64>),
}

impl CoefficientProfile {
    fn table_locate(n: usize, s: f64) -> (usize, f64, f64) {
        let d = 2.0 / (n - 1) as f64;
        let x = (s + 1.0) / d;
        let k = (x.floor() as usize).min(n - 2);
        (k, x - k as f64, d)
    }

    fn table_slopes(v: &[f64], k: usize, d: f64) -> f64 {
        let n = v.len();
        if n == 2 {
            (v[1] - v[0]) / d
        } else if k == 0 {
            (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * d)
        } else if k == n - 1 {
            (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * d)
        } else {
            (v[k + 1] - v[k - 1]) / (2.0 * d)
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        match self {
            CoefficientProfile::Constant(c) => *c,
            CoefficientProfile::SmoothTable(v) => {
                let s = s.clamp(-1.0, 1.0);
                let (k, t, d) = Self::table_locate(v.len(), s);
                let m0 = Self::table_slopes(v, k, d) * d;
                let m1 = Self::table_slopes(v, k + 1, d) * d;
                let t2 = t * t;
                let t3 = t2 * t;
                (2.0 * t3 - 3.0 * t2 + 1.0) * v[k]
                    + (t3 - 2.0 * t2 + t) * m0
                    + (-2.0 * t3 + 3.0 * t2) * v[k + 1]
                    + (t3 - t2) * m1
            }
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match self {
            CoefficientProfile::Constant(_) => 0.0,
            CoefficientProfile::SmoothTable(v) => {
                if !(-1.0..=1.0).contains(&s) {
                    return 0.0;
                }
                let (k, t, d) = Self::table_locate(v.len(), s);
                let m0 = Self::table_slopes(v, k, d) * d;
                let m1 = Self::table_slopes(v, k + 1, d) * d;
                let t2 = t * t;
                ((6.0 * t2 - 6.0 * t) * v[k]
                    + (3.0 * t2 - 4.0 * t + 1.0) * m0
                    + (-6.0 * t2 + 6.0 * t) * v[k + 1]
                    + (3.0 * t2 - 2.0 * t) * m1)
                    / d
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, CoefficientProfile::Constant(_))
    }

    /// Minimum and maximum over `[-1, 1]` (sampled for tables).
    pub fn range(&self) -> (f64, f64) {
        match self {
            CoefficientProfile::Constant(c) => (*c, *c),
            CoefficientProfile::SmoothTable(_) => {
                let n = 4001;
                (0..n)
                    .map(|k| self.value(-1.0 + 2.0 * k as f64 / (n - 1) as f64))
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                        (lo.min(x), hi.max(x))
                    })
            }
        }
    }

    /// Build a table by sampling `f` at `n` uniform points on `[-1, 1]`.
    pub fn tabulate(n: usize, f: impl Fn(f64) -> f64) -> Self {
        assert!(n >= 2, "a coefficient table needs at least two samples");
        CoefficientProfile::SmoothTable(
            (0..n)
                .map(|k| f(-1.0 + 2.0 * k as f64 / (n - 1) as f64))
                .collect(),
        )
    }

    fn validate(&self, name: &str) -> Result<()> {
        if let CoefficientProfile::SmoothTable(v) = self {
            if v.len() < 2 {
                return Err(Error::Validation(format!(
                    "{name}: table needs at least two samples"
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("{name}: non-finite table entry")));
            }
        }
        Ok(())
    }
}

/// Densities, coefficient profiles and the homogeneous free energy.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub rho1: f64,
    pub rho2: f64,
    /// Gradient-energy coefficient `a(phi)`.
    pub a_coeff: CoefficientProfile,
    pub mobility: CoefficientProfile,
    pub viscosity: CoefficientProfile,
    pub potential: PotentialSpec,
    pub variant: Variant,
    /// Common lower bound of `a`, `m`, `eta` on `[-1, 1]`.
    pub m0: f64,
    /// Common upper bound of `a`, `m`, `eta` on `[-1, 1]`.
    pub k_max: f64,
}

impl ModelParams {
    /// Parameters with constant coefficients; the bounds are taken from the constants.
    pub fn constant(
        rho1: f64,
        rho2: f64,
        a: f64,
        mobility: f64,
        viscosity: f64,
        potential: PotentialSpec,
        variant: Variant,
    ) -> Self {
        ModelParams {
            rho1,
            rho2,
            a_coeff: CoefficientProfile::Constant(a),
            mobility: CoefficientProfile::Constant(mobility),
            viscosity: CoefficientProfile::Constant(viscosity),
            potential,
            variant,
            m0: a.min(mobility).min(viscosity),
            k_max: a.max(mobility).max(viscosity),
        }
    }

    /// `(rho2 - rho1) / 2`, the derivative of the density with respect to `phi`.
    pub fn beta(&self) -> f64 {
        (self.rho2 - self.rho1) / 2.0
    }

    pub fn rho_of_phi(&self, phi: f64) -> f64 {
        rho_of_phi(phi, self.rho1, self.rho2)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho1 > 0.0 && self.rho1.is_finite()) || !(self.rho2 > 0.0 && self.rho2.is_finite())
        {
            return Err(Error::Validation(format!(
                "densities must be positive and finite (rho1 = {}, rho2 = {})",
                self.rho1, self.rho2
            )));
        }
        if !(self.m0 > 0.0) || !(self.k_max >= self.m0) || !self.k_max.is_finite() {
            return Err(Error::Validation(format!(
                "coefficient bounds need 0 < m0 <= K (m0 = {}, K = {})",
                self.m0, self.k_max
            )));
        }
        for (name, p) in [
            ("a", &self.a_coeff),
            ("mobility", &self.mobility),
            ("viscosity", &self.viscosity),
        ] {
            p.validate(name)?;
            let (lo, hi) = p.range();
            // Relative slack for tables whose extremes are reached only up to rounding.
            let slack = 1e-12 * self.k_max;
            if lo < self.m0 - slack || hi > self.k_max + slack {
                return Err(Error::Validation(format!(
                    "{name} ranges over [{lo}, {hi}], outside the bounds [{}, {}]",
                    self.m0, self.k_max
                )));
            }
        }
        self.potential.validate()?;
        if self.variant == Variant::ModelH && self.rho1 != self.rho2 {
            return Err(Error::Validation(
                "the matched-density path requires rho1 == rho2".into(),
            ));
        }
        Ok(())
    }
}

/// Mixture density: affine in `phi`, equal to `rho1` at -1 and `rho2` at 1.
pub fn rho_of_phi(phi: f64, rho1: f64, rho2: f64) -> f64 {
    0.5 * (rho1 + rho2) + 0.5 * (rho2 - rho1) * phi
}
