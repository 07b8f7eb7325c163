//! Implicit Cahn–Hilliard stage: given `phi_k` and a transporting velocity,
//! find `phi` such that
//!
//! ```text
//! (phi - phi_k)/h + v . grad phi_k = div(m(phi_k) grad mu)
//! mu = F(phi, phi_k) * ( -lap A(phi) + tpsi0'(A(phi)) - kappa_t (A(phi) + A(phi_k))/2 )
//! ```
//!
//! with `mu` eliminated, by damped Newton on the `phi` residual.

use crate::error::{Error, Result};
use crate::grid::{FaceVectorField, MacGrid, ScalarField};
use crate::model::ModelParams;
use crate::ops;
use crate::potential::PotentialSpec;
use crate::sparse::{norm, Triplets};
use crate::transform::TransformA;

/// Largest admissible `|phi|` for the singular potential.
pub const PHI_BOUND: f64 = 1.0 - 1e-10;

/// One implicit Cahn–Hilliard solve.
#[derive(Debug, Clone, Copy)]
pub struct ChStepProblem<'a> {
    pub phi_k: &'a ScalarField,
    /// Transporting velocity (the lagged outer iterate).
    pub v: &'a FaceVectorField,
    pub h: f64,
    pub params: &'a ModelParams,
    pub ta: &'a TransformA,
    /// Cell field subtracted from the chemical potential after the secant
    /// scaling (the kinetic term of the variant without relative flux).
    pub mu_shift: Option<&'a ScalarField>,
    /// Newton starting point; `phi_k` when absent.
    pub guess: Option<&'a ScalarField>,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub damping_min: f64,
    pub lin_tol: f64,
}

#[derive(Debug, Clone)]
pub struct ChStepResult {
    pub phi: ScalarField,
    pub mu: ScalarField,
    pub newton_iters: usize,
    pub lin_iters: usize,
    pub residual_norm: f64,
    /// `||R||_h` at the start and after every Newton update.
    pub residual_history: Vec<f64>,
    pub min_phi: f64,
    pub max_phi: f64,
}

/// Quantities whose boundedness the a-priori estimate guarantees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChemPotDiagnostics {
    pub mean_mu: f64,
    pub integral_mu: f64,
    pub l2_psi0_prime: f64,
    pub l2_grad_phi: f64,
}

impl ChStepProblem<'_> {
    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::Validation(format!("time step must be positive, got {}", self.h)));
        }
        self.phi_k.grid.check_same(&self.v.grid, "cahn-hilliard velocity")?;
        let m = self.phi_k.mean();
        if !(m > -1.0 && m < 1.0) {
            return Err(Error::Domain { what: "mean of phi_k must lie in (-1, 1)", value: m });
        }
        check_admissible(self.phi_k, &self.params.potential)
    }
}

/// Reject states outside the domain of the potential.
pub fn check_admissible(phi: &ScalarField, pot: &PotentialSpec) -> Result<()> {
    for &s in &phi.data {
        if !s.is_finite() || (pot.is_singular() && s.abs() >= 1.0) {
            return Err(Error::Domain { what: "phi must lie strictly inside (-1, 1)", value: s });
        }
    }
    Ok(())
}

fn transform_value(ta: &TransformA, s: f64) -> Result<f64> {
    if ta.is_closed_form() {
        Ok(ta.eval_unchecked(s))
    } else {
        ta.transform(s)
    }
}

/// `A(phi)` cellwise.
pub fn transform_field(phi: &ScalarField, ta: &TransformA) -> Result<ScalarField> {
    phi.try_map(|s| transform_value(ta, s))
}

/// Cell mobility `m(phi_k)` averaged onto faces.
pub fn mobility_faces(phi_k: &ScalarField, params: &ModelParams) -> FaceVectorField {
    ops::interp_center_to_face(&phi_k.map(|s| params.mobility.value(s)))
}

fn unit_faces(g: MacGrid) -> FaceVectorField {
    FaceVectorField::constant(g, 1.0, 1.0)
}

/// The bracket `b = -lap A(phi) + tpsi0'(A(phi)) - kappa_t (A(phi) + A(phi_k))/2`.
fn bracket(phi: &ScalarField, a_phi: &ScalarField, a_phik: &ScalarField, ta: &TransformA, pot: &PotentialSpec) -> Result<ScalarField> {
    let lap = ops::laplace_neumann(a_phi, &unit_faces(phi.grid))?;
    let kt = ta.kappa_tilde();
    let mut b = ScalarField::zeros(phi.grid);
    for k in 0..b.data.len() {
        b.data[k] = -lap.data[k] + ta.tilde_psi0_prime_at(phi.data[k], pot)?
            - 0.5 * kt * (a_phi.data[k] + a_phik.data[k]);
    }
    Ok(b)
}

/// Chemical potential from the secant form of the transformed equation.
pub fn mu_from_phi(phi: &ScalarField, phi_k: &ScalarField, ta: &TransformA, pot: &PotentialSpec) -> Result<ScalarField> {
    phi.grid.check_same(&phi_k.grid, "mu_from_phi")?;
    check_admissible(phi, pot)?;
    let a_phi = transform_field(phi, ta)?;
    let a_phik = transform_field(phi_k, ta)?;
    let b = bracket(phi, &a_phi, &a_phik, ta, pot)?;
    Ok(ScalarField {
        grid: phi.grid,
        data: (0..b.data.len()).map(|k| ta.diff_quotient(phi.data[k], phi_k.data[k]) * b.data[k]).collect(),
    })
}

fn mu_for_problem(phi: &ScalarField, p: &ChStepProblem) -> Result<ScalarField> {
    let mut mu = mu_from_phi(phi, p.phi_k, p.ta, &p.params.potential)?;
    if let Some(s) = p.mu_shift {
        mu.axpy(-1.0, s);
    }
    Ok(mu)
}

/// `R(phi) = (phi - phi_k)/h + v . grad phi_k - div(m(phi_k) grad mu(phi))`.
pub fn ch_residual(phi: &ScalarField, p: &ChStepProblem) -> Result<ScalarField> {
    let mu = mu_for_problem(phi, p)?;
    residual_with_mu(phi, &mu, p)
}

fn residual_with_mu(phi: &ScalarField, mu: &ScalarField, p: &ChStepProblem) -> Result<ScalarField> {
    let adv = ops::advection(p.v, p.phi_k)?;
    let diff = ops::laplace_neumann(mu, &mobility_faces(p.phi_k, p.params))?;
    let mut r = phi.sub(p.phi_k).scaled(1.0 / p.h);
    r.axpy(1.0, &adv);
    r.axpy(-1.0, &diff);
    Ok(r)
}

/// Pointwise pieces of the linearised chemical potential: the diagonal
/// `F_s b + F (tpsi0'' - kappa_t/2) sqrt(a)`, and `F`, `sqrt(a)` for the
/// Laplacian part `diag(F) (-lap) diag(sqrt(a))`.
struct MuLinearisation {
    diag: Vec<f64>,
    f: Vec<f64>,
    sqrt_a: Vec<f64>,
}

fn linearise_mu(phi: &ScalarField, p: &ChStepProblem) -> Result<MuLinearisation> {
    let pot = &p.params.potential;
    let ta = p.ta;
    check_admissible(phi, pot)?;
    let a_phi = transform_field(phi, ta)?;
    let a_phik = transform_field(p.phi_k, ta)?;
    let b = bracket(phi, &a_phi, &a_phik, ta, pot)?;
    let n = phi.data.len();
    let (mut diag, mut f, mut sqrt_a) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let kt = ta.kappa_tilde();
    for k in 0..n {
        let (s, t) = (phi.data[k], p.phi_k.data[k]);
        let fk = ta.diff_quotient(s, t);
        let sa = ta.derivative(s);
        let second = ta.tilde_psi0_second_at(s, pot)?;
        debug_assert!(second >= -1e-12 * (1.0 + second.abs()));
        diag[k] = ta.diff_quotient_ds(s, t) * b.data[k] + fk * (second - 0.5 * kt) * sa;
        f[k] = fk;
        sqrt_a[k] = sa;
    }
    Ok(MuLinearisation { diag, f, sqrt_a })
}

/// Rows of `div(coeff grad .)` as `(column, value)` lists.
pub(crate) fn five_point_rows(coeff: &FaceVectorField) -> Vec<Vec<(usize, f64)>> {
    let g = coeff.grid;
    let (ihx2, ihy2) = (1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy));
    let mut rows = Vec::with_capacity(g.n_cells());
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = g.cell(i, j);
            let mut row = Vec::with_capacity(5);
            let mut diag = 0.0;
            let mut nb = |idx: usize, w: f64| {
                row.push((idx, w));
                diag -= w;
            };
            if i > 0 {
                nb(g.cell(i - 1, j), coeff.xf(i, j) * ihx2);
            }
            if i + 1 < g.nx {
                nb(g.cell(i + 1, j), coeff.xf(i + 1, j) * ihx2);
            }
            if j > 0 {
                nb(g.cell(i, j - 1), coeff.yf(i, j) * ihy2);
            }
            if j + 1 < g.ny {
                nb(g.cell(i, j + 1), coeff.yf(i, j + 1) * ihy2);
            }
            row.push((c, diag));
            rows.push(row);
        }
    }
    rows
}

/// Sparse Newton matrix `I/h - L_m D mu`, a 13-point stencil.
pub(crate) fn ch_jacobian(phi: &ScalarField, p: &ChStepProblem) -> Result<Triplets> {
    let g = phi.grid;
    let lin = linearise_mu(phi, p)?;
    let lm = five_point_rows(&mobility_faces(p.phi_k, p.params));
    let lap = five_point_rows(&unit_faces(g));
    let n = g.n_cells();
    let mut t = Triplets::new(n);
    for r in 0..n {
        t.push(r, r, 1.0 / p.h);
        for &(k, l) in &lm[r] {
            t.push(r, k, -l * lin.diag[k]);
            for &(d, w) in &lap[k] {
                // -L_m diag(F) (-lap) diag(sqrt a)
                t.push(r, d, l * lin.f[k] * w * lin.sqrt_a[d]);
            }
        }
    }
    Ok(t)
}

/// Matrix-free Jacobian-vector product of [`ch_residual`], used to check
/// the assembled Newton matrix.
pub fn ch_jacobian_apply(phi: &ScalarField, dphi: &ScalarField, p: &ChStepProblem) -> Result<ScalarField> {
    let lin = linearise_mu(phi, p)?;
    let g = phi.grid;
    let scaled = ScalarField { grid: g, data: (0..dphi.data.len()).map(|k| lin.sqrt_a[k] * dphi.data[k]).collect() };
    let lap = ops::laplace_neumann(&scaled, &unit_faces(g))?;
    let dmu = ScalarField {
        grid: g,
        data: (0..dphi.data.len()).map(|k| lin.diag[k] * dphi.data[k] - lin.f[k] * lap.data[k]).collect(),
    };
    let mut out = dphi.scaled(1.0 / p.h);
    out.axpy(-1.0, &ops::laplace_neumann(&dmu, &mobility_faces(p.phi_k, p.params))?);
    Ok(out)
}

/// Dense copy of the assembled Newton matrix (row-major), for oracles.
pub fn ch_jacobian_dense(phi: &ScalarField, p: &ChStepProblem) -> Result<Vec<Vec<f64>>> {
    let t = ch_jacobian(phi, p)?;
    let n = t.dim();
    let mut a = vec![vec![0.0; n]; n];
    let mut e = vec![0.0; n];
    for c in 0..n {
        e[c] = 1.0;
        let col = t.matvec(&e);
        for r in 0..n {
            a[r][c] = col[r];
        }
        e[c] = 0.0;
    }
    Ok(a)
}

fn h_norm(r: &ScalarField) -> f64 {
    r.norm()
}

fn admissible(phi: &ScalarField, pot: &PotentialSpec) -> bool {
    phi.data.iter().all(|s| s.is_finite() && (!pot.is_singular() || s.abs() <= PHI_BOUND))
}

/// Damped Newton for the implicit Cahn–Hilliard stage.
///
/// The step is halved until the iterate stays inside `|phi| <= 1 - 1e-10`
/// and the residual decreases; below `damping_min` the step is declared
/// inadmissible.
pub fn ch_solve(p: &ChStepProblem) -> Result<ChStepResult> {
    p.validate()?;
    let pot = &p.params.potential;
    let tol = p.newton_tol * (1.0 + h_norm(p.phi_k));
    let mut phi = p.guess.cloned().unwrap_or_else(|| p.phi_k.clone());
    if !admissible(&phi, pot) {
        phi = p.phi_k.clone();
    }
    let mut r = ch_residual(&phi, p)?;
    let mut rn = h_norm(&r);
    let mut history = vec![rn];
    let mut iters = 0;
    let mut lin_iters = 0;

    while !(rn <= tol) {
        if iters >= p.newton_max_iter || !rn.is_finite() {
            return Err(Error::NewtonDiverged { iters, residual: rn });
        }
        iters += 1;
        let jac = ch_jacobian(&phi, p)?;
        let rhs: Vec<f64> = r.data.iter().map(|x| -x).collect();
        let sol = jac.solve(&rhs, p.lin_tol, 3)?;
        lin_iters += sol.iters;

        let mut lambda = 1.0;
        loop {
            let mut trial = phi.clone();
            for (t, d) in trial.data.iter_mut().zip(&sol.x) {
                *t += lambda * d;
            }
            if admissible(&trial, pot) {
                let rt = ch_residual(&trial, p)?;
                let rtn = h_norm(&rt);
                if rtn < rn || rtn <= tol {
                    phi = trial;
                    r = rt;
                    rn = rtn;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < p.damping_min {
                // a full step that only fails to decrease at roundoff level counts as converged
                if rn <= 10.0 * tol && norm(&sol.x) * phi.grid.cell_volume().sqrt() <= tol * p.h {
                    rn = rn.min(tol);
                    break;
                }
                return Err(Error::StepNotAdmissible { damping_min: p.damping_min });
            }
        }
        history.push(rn);
    }

    let mu = mu_for_problem(&phi, p)?;
    Ok(ChStepResult {
        min_phi: phi.min(),
        max_phi: phi.max(),
        phi,
        mu,
        newton_iters: iters,
        lin_iters,
        residual_norm: rn,
        residual_history: history,
    })
}

/// A priori bounds monitored each step: `int mu`, `||tpsi0'(A(phi))||`
/// and `||grad phi||`.
pub fn chempot_diagnostics(phi: &ScalarField, mu: &ScalarField, ta: &TransformA, pot: &PotentialSpec) -> Result<ChemPotDiagnostics> {
    let psi0 = phi.try_map(|s| ta.tilde_psi0_prime_at(s, pot))?;
    Ok(ChemPotDiagnostics {
        mean_mu: mu.mean(),
        integral_mu: mu.integral(),
        l2_psi0_prime: psi0.norm(),
        l2_grad_phi: ops::grad_cells(phi).norm(),
    })
}

/// `E_free = sum Psi(phi) + |grad_h A(phi)|^2 / 2`.
pub fn free_energy(phi: &ScalarField, ta: &TransformA, pot: &PotentialSpec) -> Result<f64> {
    let bulk: f64 = phi.data.iter().map(|&s| pot.psi(s)).sum::<Result<f64>>()? * phi.grid.cell_volume();
    let ga = ops::grad_cells(&transform_field(phi, ta)?);
    Ok(bulk + 0.5 * ga.dot(&ga))
}
