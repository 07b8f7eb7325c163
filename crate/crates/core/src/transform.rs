//! The gradient-coefficient transform `A(s) = ∫_0^s sqrt(a(τ)) dτ` and the
//! reparametrized potential built on top of it.
//!
//! With `r = A(phi)` the chemical-potential equation reads
//! `a(phi)^{-1/2} mu + kt r = tpsi0'(r) - Δr`, where `tpsi(r) = psi(A^{-1}(r))`
//! and `tpsi0(r) = tpsi(r) + kt r^2 / 2` is convex.

use crate::error::{Error, Result};
use crate::model::CoefficientProfile;
use crate::potential::PotentialSpec;

/// 5-point Gauss–Legendre rule on `[0, 1]`: (node, weight).
const GAUSS5: [(f64, f64); 5] = [
    (0.046_910_077_030_668_004, 0.118_463_442_528_094_54),
    (0.230_765_344_947_158_45, 0.239_314_335_249_683_23),
    (0.5, 0.284_444_444_444_444_45),
    (0.769_234_655_052_841_6, 0.239_314_335_249_683_23),
    (0.953_089_922_969_332, 0.118_463_442_528_094_54),
];

/// Below this separation the difference quotient switches to its integral form.
pub const NEAR_DIAGONAL: f64 = 1e-8;

/// Safety factor on the sampled convexity defect for non-constant `a`.
const KAPPA_SAFETY: f64 = 1.05;

const TABLE_INTERVALS: usize = 2048;

#[derive(Debug, Clone)]
struct Table {
    /// `A` at the nodes `-1 + k * step`.
    values: Vec<f64>,
    /// `sqrt(a)` at the same nodes.
    slopes: Vec<f64>,
    step: f64,
}

impl Table {
    fn build(a: &CoefficientProfile) -> Self {
        let n = TABLE_INTERVALS;
        let step = 2.0 / n as f64;
        let node = |k: usize| -1.0 + k as f64 * step;
        let piece = |k: usize| -> f64 {
            let s0 = node(k);
            GAUSS5
                .iter()
                .map(|&(x, w)| w * a.value(s0 + x * step).sqrt())
                .sum::<f64>()
                * step
        };
        let mid = n / 2;
        let mut values = vec![0.0; n + 1];
        for k in mid..n {
            values[k + 1] = values[k] + piece(k);
        }
        for k in (0..mid).rev() {
            values[k] = values[k + 1] - piece(k);
        }
        let slopes = (0..=n).map(|k| a.value(node(k)).sqrt()).collect();
        Table { values, slopes, step }
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let x = (s + 1.0) / self.step;
        let k = (x.floor().max(0.0) as usize).min(self.values.len() - 2);
        (k, x - k as f64)
    }

    fn hermite(&self, k: usize, t: f64) -> f64 {
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * self.step, self.slopes[k + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1
    }

    fn hermite_dt(&self, k: usize, t: f64) -> f64 {
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * self.step, self.slopes[k + 1] * self.step);
        let t2 = t * t;
        (6.0 * t2 - 6.0 * t) * (y0 - y1)
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (3.0 * t2 - 2.0 * t) * m1
    }

    fn eval(&self, s: f64) -> f64 {
        let (k, t) = self.locate(s);
        self.hermite(k, t)
    }

    fn invert(&self, r: f64) -> f64 {
        // values are strictly increasing; find the bracketing interval
        let k = match self
            .values
            .binary_search_by(|v| v.partial_cmp(&r).expect("finite table"))
        {
            Ok(k) => return -1.0 + k as f64 * self.step,
            Err(k) => k.clamp(1, self.values.len() - 1) - 1,
        };
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let mut t = ((r - y0) / (y1 - y0)).clamp(0.0, 1.0);
        for _ in 0..100 {
            let f = self.hermite(k, t) - r;
            if f == 0.0 {
                break;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let df = self.hermite_dt(k, t);
            let mut next = t - f / df;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 1e-16 {
                t = next;
                break;
            }
            t = next;
        }
        -1.0 + (k as f64 + t) * self.step
    }
}

/// The monotone map `A` with inverse, derivative, difference quotient and the
/// convexity defect `kappa_tilde` of the reparametrized potential.
#[derive(Debug, Clone)]
pub struct TransformA {
    a_coeff: CoefficientProfile,
    /// `sqrt(a0)` when `a` is constant.
    closed_form: Option<f64>,
    table: Option<Table>,
    kappa_tilde: f64,
}

impl TransformA {
    pub fn new(a_coeff: &CoefficientProfile, potential: &PotentialSpec) -> Self {
        let (closed_form, table) = match a_coeff {
            CoefficientProfile::Constant(c) => (Some(c.sqrt()), None),
            CoefficientProfile::SmoothTable(_) => (None, Some(Table::build(a_coeff))),
        };
        let mut t = TransformA {
            a_coeff: a_coeff.clone(),
            closed_form,
            table,
            kappa_tilde: 0.0,
        };
        t.kappa_tilde = t.estimate_kappa_tilde(potential);
        t
    }

    pub fn is_closed_form(&self) -> bool {
        self.closed_form.is_some()
    }

    pub fn a_coeff(&self) -> &CoefficientProfile {
        &self.a_coeff
    }

    /// `[A(-1), A(1)]`.
    pub fn range(&self) -> (f64, f64) {
        match (&self.closed_form, &self.table) {
            (Some(c), _) => (-c, *c),
            (None, Some(t)) => (t.values[0], *t.values.last().unwrap()),
            _ => unreachable!(),
        }
    }

    /// `A(s)` without the domain check; `s` is clamped to `[-1, 1]` in table mode.
    pub(crate) fn eval_unchecked(&self, s: f64) -> f64 {
        match (&self.closed_form, &self.table) {
            (Some(c), _) => c * s,
            (None, Some(t)) => t.eval(s.clamp(-1.0, 1.0)),
            _ => unreachable!(),
        }
    }

    pub fn transform(&self, s: f64) -> Result<f64> {
        if !(s.abs() <= 1.0) {
            return Err(Error::Domain { what: "A needs s in [-1, 1]", value: s });
        }
        Ok(self.eval_unchecked(s))
    }

    pub fn inverse(&self, r: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !(r >= lo && r <= hi) {
            return Err(Error::Domain { what: "A^-1 needs r in [A(-1), A(1)]", value: r });
        }
        Ok(match (&self.closed_form, &self.table) {
            (Some(c), _) => (r / c).clamp(-1.0, 1.0),
            (None, Some(t)) => t.invert(r),
            _ => unreachable!(),
        })
    }

    /// `A'(s) = sqrt(a(s))`.
    pub fn derivative(&self, s: f64) -> f64 {
        match self.closed_form {
            Some(c) => c,
            None => self.a_coeff.value(s).sqrt(),
        }
    }

    /// `A''(s) = a'(s) / (2 sqrt(a(s)))`.
    pub fn second_derivative(&self, s: f64) -> f64 {
        match self.closed_form {
            Some(_) => 0.0,
            None => self.a_coeff.derivative(s) / (2.0 * self.a_coeff.value(s).sqrt()),
        }
    }

    /// `F(s, t) = (A(s) - A(t)) / (s - t)`, with `F(s, s) = sqrt(a(s))`.
    pub fn diff_quotient(&self, s: f64, t: f64) -> f64 {
        if let Some(c) = self.closed_form {
            return c;
        }
        if (s - t).abs() < NEAR_DIAGONAL {
            // ∫_0^1 sqrt(a(t + τ (s - t))) dτ, symmetrized so F(s,t) == F(t,s) bitwise
            let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
            GAUSS5
                .iter()
                .map(|&(x, w)| w * self.a_coeff.value(lo + x * (hi - lo)).sqrt())
                .sum()
        } else {
            let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
            (self.eval_unchecked(hi) - self.eval_unchecked(lo)) / (hi - lo)
        }
    }

    /// `∂F/∂s (s, t)`.
    pub fn diff_quotient_ds(&self, s: f64, t: f64) -> f64 {
        if self.closed_form.is_some() {
            return 0.0;
        }
        if (s - t).abs() < NEAR_DIAGONAL {
            // ∫_0^1 τ A''(t + τ (s - t)) dτ
            GAUSS5
                .iter()
                .map(|&(x, w)| w * x * self.second_derivative(t + x * (s - t)))
                .sum()
        } else {
            (self.derivative(s) - self.diff_quotient(s, t)) / (s - t)
        }
    }

    /// Convexity defect of `tpsi`: `tpsi'' >= -kappa_tilde`.
    pub fn kappa_tilde(&self) -> f64 {
        self.kappa_tilde
    }

    fn estimate_kappa_tilde(&self, potential: &PotentialSpec) -> f64 {
        if let CoefficientProfile::Constant(a0) = self.a_coeff {
            return potential.kappa() / a0;
        }
        let n = 2001;
        let min = (0..n)
            .map(|k| -0.999 + 1.998 * k as f64 / (n - 1) as f64)
            .filter_map(|s| self.tilde_psi_second_raw(s, potential).ok())
            .fold(f64::INFINITY, f64::min);
        (-min).max(0.0) * KAPPA_SAFETY
    }

    /// `tpsi''(A(s)) = psi''(s)/a(s) - psi'(s) a'(s) / (2 a(s)^2)`.
    fn tilde_psi_second_raw(&self, s: f64, potential: &PotentialSpec) -> Result<f64> {
        let a = self.a_coeff.value(s);
        let da = if self.is_closed_form() { 0.0 } else { self.a_coeff.derivative(s) };
        Ok(potential.d2psi(s)? / a - potential.dpsi(s)? * da / (2.0 * a * a))
    }

    /// `tpsi0'(r) = psi'(A^{-1}(r)) / sqrt(a(A^{-1}(r))) + kappa_tilde r`, for `r`
    /// strictly inside the range of `A`.
    pub fn tilde_psi0_prime(&self, r: f64, potential: &PotentialSpec) -> Result<f64> {
        let (lo, hi) = self.range();
        if potential.is_singular() && !(r > lo && r < hi) {
            return Err(Error::Domain { what: "tpsi0' needs r inside (A(-1), A(1))", value: r });
        }
        let s = self.inverse(r)?;
        Ok(potential.dpsi(s)? / self.derivative(s) + self.kappa_tilde * r)
    }

    /// `tpsi0'(A(s))` evaluated from `s` directly.
    pub fn tilde_psi0_prime_at(&self, s: f64, potential: &PotentialSpec) -> Result<f64> {
        Ok(potential.dpsi(s)? / self.derivative(s) + self.kappa_tilde * self.eval_unchecked(s))
    }

    /// `tpsi0''(A(s))` evaluated from `s` directly; non-negative by construction.
    pub fn tilde_psi0_second_at(&self, s: f64, potential: &PotentialSpec) -> Result<f64> {
        Ok(self.tilde_psi_second_raw(s, potential)? + self.kappa_tilde)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialSpec;

    fn quad_table() -> CoefficientProfile {
        CoefficientProfile::tabulate(33, |s| 1.0 + s * s)
    }

    /// Composite Simpson with 20000 panels; the test-side quadrature oracle.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let n = 20_000;
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + k as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn closed_form_values() {
        let t = TransformA::new(&CoefficientProfile::Constant(4.0), &PotentialSpec::logarithmic(1.0, 2.0));
        assert!((t.transform(0.3).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(t.transform(0.0).unwrap(), 0.0);
        assert_eq!(t.derivative(0.7), 2.0);
        assert!(t.transform(1.01).is_err());
        assert!(t.inverse(2.5).is_err());
    }

    #[test]
    fn table_endpoint_matches_quadrature_oracle() {
        let t = TransformA::new(&quad_table(), &PotentialSpec::logarithmic(1.0, 2.0));
        let oracle = simpson(|x| (1.0 + x * x).sqrt(), 0.0, 1.0);
        assert!((oracle - 1.147_793_6).abs() < 1e-7);
        assert!((t.transform(1.0).unwrap() - oracle).abs() < 1e-12);
        assert_eq!(t.transform(0.0).unwrap(), 0.0);
    }

    #[test]
    fn difference_quotient_examples() {
        let c4 = TransformA::new(&CoefficientProfile::Constant(4.0), &PotentialSpec::logarithmic(1.0, 2.0));
        assert_eq!(c4.diff_quotient(0.2, 0.2), 2.0);
        let c9 = TransformA::new(&CoefficientProfile::Constant(9.0), &PotentialSpec::logarithmic(1.0, 2.0));
        assert_eq!(c9.diff_quotient(0.4, -0.4), 3.0);

        let t = TransformA::new(&quad_table(), &PotentialSpec::logarithmic(1.0, 2.0));
        let oracle = simpson(|tau| (1.0 + (0.1 + 0.4 * tau).powi(2)).sqrt(), 0.0, 1.0);
        assert!((oracle - 1.0498700).abs() < 5e-7);
        assert!((t.diff_quotient(0.5, 0.1) - oracle).abs() < 1e-11);
    }

    #[test]
    fn difference_quotient_continuous_across_diagonal() {
        let t = TransformA::new(&quad_table(), &PotentialSpec::logarithmic(1.0, 2.0));
        let s = 0.37;
        let on = t.diff_quotient(s, s);
        assert!((on - (1.0 + s * s).sqrt()).abs() < 1e-14);
        for d in [2e-8, 9e-9, 1e-7, 1e-6] {
            assert!((t.diff_quotient(s + d, s) - on).abs() < 1e-6, "d = {d}");
        }
    }

    #[test]
    fn kappa_tilde_examples() {
        let log = PotentialSpec::logarithmic(1.0, 2.0);
        let t1 = TransformA::new(&CoefficientProfile::Constant(1.0), &log);
        assert_eq!(t1.kappa_tilde(), 1.0);
        let t4 = TransformA::new(&CoefficientProfile::Constant(4.0), &log);
        assert_eq!(t4.kappa_tilde(), 0.25);
        let convex = PotentialSpec::logarithmic(2.0, 1.0);
        assert_eq!(TransformA::new(&CoefficientProfile::Constant(3.0), &convex).kappa_tilde(), 0.0);
        assert_eq!(TransformA::new(&quad_table(), &convex).kappa_tilde(), 0.0);
    }

    #[test]
    fn constant_a_chain_rule() {
        // tpsi0'(r) = psi'(r / sqrt(a0)) / sqrt(a0) + (kappa / a0) r
        let log = PotentialSpec::logarithmic(1.0, 2.0);
        let t = TransformA::new(&CoefficientProfile::Constant(4.0), &log);
        for r in [-1.5, -0.4, 0.0, 0.9, 1.95] {
            let expected = log.dpsi(r / 2.0).unwrap() / 2.0 + 0.25 * r;
            assert!((t.tilde_psi0_prime(r, &log).unwrap() - expected).abs() < 1e-14);
        }
        assert_eq!(t.tilde_psi0_prime(0.0, &log).unwrap(), 0.0);
        assert!(t.tilde_psi0_prime(2.0, &log).is_err());
    }

    #[test]
    fn tilde_psi0_monotone_sweeps() {
        let log = PotentialSpec::logarithmic(1.0, 2.0);
        for a in [CoefficientProfile::Constant(1.0), CoefficientProfile::Constant(4.0), quad_table()] {
            let t = TransformA::new(&a, &log);
            let (lo, hi) = t.range();
            let width = hi - lo;
            let vals: Vec<f64> = (0..1000)
                .map(|k| lo + width * (0.0005 + 0.999 * k as f64 / 999.0))
                .map(|r| t.tilde_psi0_prime(r, &log).unwrap())
                .collect();
            assert!(vals.windows(2).all(|w| w[1] >= w[0]), "{a:?}");
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let t = TransformA::new(&quad_table(), &PotentialSpec::logarithmic(1.0, 2.0));
        let h = 1e-6;
        for s in [-0.8, -0.31, 0.05, 0.66] {
            let fd = (t.transform(s + h).unwrap() - t.transform(s - h).unwrap()) / (2.0 * h);
            assert!((fd / t.derivative(s) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn quotient_derivative_matches_finite_difference() {
        let t = TransformA::new(&quad_table(), &PotentialSpec::logarithmic(1.0, 2.0));
        let h = 1e-6;
        for (s, u) in [(0.5, 0.1), (-0.3, 0.2)] {
            let fd = (t.diff_quotient(s + h, u) - t.diff_quotient(s - h, u)) / (2.0 * h);
            assert!((fd - t.diff_quotient_ds(s, u)).abs() < 1e-6, "{s} {u}");
        }
        // on the diagonal: a'(s) / (4 sqrt(a(s)))
        let s: f64 = 0.25;
        let exact = 2.0 * s / (4.0 * (1.0 + s * s).sqrt());
        assert!((t.diff_quotient_ds(s, s + 1e-9) - exact).abs() < 1e-8);
    }
}
