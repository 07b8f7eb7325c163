//! Implicit momentum stage: given `phi_k`, the new `phi` (through `rho_new`),
//! `mu`, and the lagged transporting velocity, solve the linear saddle-point
//! problem for `(v, g)` with `div v = 0`.
//!
//! The momentum equation is written in skew form so that testing it with `v`
//! reproduces the kinetic-energy telescoping exactly:
//!
//! ```text
//! AGG:       (rho_new + rho_k)/(2h) v + K(rho_k v_tr + J) v + V v + grad g = rho_k v_k / h + mu grad phi_k
//! variant:   rho_new/h v + K(rho_k v_tr) v - R(v) + V v + grad g           = rho_k v_k / h + mu grad phi_k
//! matched:   rho/h v + K(rho v_tr) v + V v + grad g                        = rho v_k / h + mu grad phi_k
//! ```
//!
//! `K` is the antisymmetric transport operator, `V` the viscous operator and
//! `R` the energy-neutral rotation built from `grad rho_k` and `v_tr`.

use crate::error::{Error, Result};
use crate::grid::{FaceVectorField, MacGrid, ScalarField};
use crate::model::{ModelParams, Variant};
use crate::ops;
use crate::sparse::Triplets;

#[derive(Debug, Clone, Copy)]
pub struct NsStepProblem<'a> {
    pub rho_k: &'a ScalarField,
    pub rho_new: &'a ScalarField,
    pub phi_k: &'a ScalarField,
    pub mu: &'a ScalarField,
    pub jtilde: &'a FaceVectorField,
    pub v_k: &'a FaceVectorField,
    pub v_transport: &'a FaceVectorField,
    pub h: f64,
    pub params: &'a ModelParams,
    pub lin_tol: f64,
    /// Refinement sweeps allowed after the direct solve.
    pub lin_max_iter: usize,
}

#[derive(Debug, Clone)]
pub struct NsStepResult {
    pub v: FaceVectorField,
    /// Mean-zero reformulated pressure.
    pub g: ScalarField,
    pub lin_iters: usize,
    pub div_inf: f64,
    pub rel_residual: f64,
}

/// Kinetic bookkeeping of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticTerms {
    pub e_kin_new: f64,
    pub e_kin_old: f64,
    pub inertia_defect: f64,
}

/// Relative mass flux `J = -(rho2 - rho1)/2 m(phi_k) grad mu` on faces.
pub fn compute_jtilde(phi_k: &ScalarField, mu: &ScalarField, params: &ModelParams) -> Result<FaceVectorField> {
    phi_k.grid.check_same(&mu.grid, "relative flux")?;
    let m = ops::interp_center_to_face(&phi_k.map(|s| params.mobility.value(s)));
    Ok(ops::grad_cells(mu).hadamard(&m).scaled(-params.beta()))
}

/// Face densities `rho^f` (means of adjacent cells).
pub fn face_density(rho: &ScalarField) -> FaceVectorField {
    ops::interp_center_to_face(rho)
}

/// `int rho_new |v|^2/2`, `int rho_k |v_k|^2/2`, `int rho_k |v - v_k|^2/2`.
pub fn kinetic_terms(v: &FaceVectorField, v_k: &FaceVectorField, rho_k: &ScalarField, rho_new: &ScalarField) -> KineticTerms {
    let rk = face_density(rho_k);
    let rn = face_density(rho_new);
    let dv = v.sub(v_k);
    KineticTerms {
        e_kin_new: 0.5 * v.hadamard(&rn).dot(v),
        e_kin_old: 0.5 * v_k.hadamard(&rk).dot(v_k),
        inertia_defect: 0.5 * dv.hadamard(&rk).dot(&dv),
    }
}

/// Numbering of the unknowns: interior x-faces, interior y-faces, cells.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    pub g: MacGrid,
    pub n_u: usize,
    pub n_v: usize,
}

impl Layout {
    pub fn new(g: MacGrid) -> Self {
        Layout { g, n_u: (g.nx - 1) * g.ny, n_v: g.nx * (g.ny - 1) }
    }
    pub fn n_vel(&self) -> usize {
        self.n_u + self.n_v
    }
    pub fn n_total(&self) -> usize {
        self.n_vel() + self.g.n_cells()
    }
    /// Unknown index of x-face `(i, j)`, `None` on walls.
    pub fn ux(&self, i: usize, j: usize) -> Option<usize> {
        (i >= 1 && i < self.g.nx && j < self.g.ny).then(|| j * (self.g.nx - 1) + (i - 1))
    }
    pub fn uy(&self, i: usize, j: usize) -> Option<usize> {
        (j >= 1 && j < self.g.ny && i < self.g.nx).then(|| self.n_u + (j - 1) * self.g.nx + i)
    }
    pub fn p(&self, i: usize, j: usize) -> usize {
        self.n_vel() + self.g.cell(i, j)
    }

    pub fn gather(&self, v: &FaceVectorField) -> Vec<f64> {
        let g = self.g;
        let mut out = vec![0.0; self.n_vel()];
        for j in 0..g.ny {
            for i in 1..g.nx {
                out[self.ux(i, j).unwrap()] = v.xf(i, j);
            }
        }
        for j in 1..g.ny {
            for i in 0..g.nx {
                out[self.uy(i, j).unwrap()] = v.yf(i, j);
            }
        }
        out
    }

    pub fn scatter(&self, x: &[f64]) -> FaceVectorField {
        let g = self.g;
        let mut v = FaceVectorField::zeros(g);
        for j in 0..g.ny {
            for i in 1..g.nx {
                v.x[g.xface(i, j)] = x[self.ux(i, j).unwrap()];
            }
        }
        for j in 1..g.ny {
            for i in 0..g.nx {
                v.y[g.yface(i, j)] = x[self.uy(i, j).unwrap()];
            }
        }
        v
    }
}

/// Assembled saddle-point system `[M G; -D 0] (v, g) = (f, 0)` with the first
/// continuity row replaced by `g_0 = 0`.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub(crate) layout: Layout,
    pub(crate) matrix: Triplets,
    pub rhs: Vec<f64>,
}

impl SaddleSystem {
    pub fn dim(&self) -> usize {
        self.layout.n_total()
    }

    /// Dense copy of the whole matrix.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut a = vec![vec![0.0; n]; n];
        let mut e = vec![0.0; n];
        for c in 0..n {
            e[c] = 1.0;
            let col = self.matrix.matvec(&e);
            for (r, val) in col.into_iter().enumerate() {
                a[r][c] = val;
            }
            e[c] = 0.0;
        }
        a
    }

    /// Dense velocity block `M` in the unknown numbering of interior faces.
    pub fn velocity_block(&self) -> Vec<Vec<f64>> {
        let nv = self.layout.n_vel();
        self.dense().into_iter().take(nv).map(|row| row[..nv].to_vec()).collect()
    }

    /// Interior-face values of a face field in the unknown numbering.
    pub fn gather(&self, v: &FaceVectorField) -> Vec<f64> {
        self.layout.gather(v)
    }

    /// Inverse of [`SaddleSystem::gather`]; boundary faces are zero.
    pub fn scatter(&self, x: &[f64]) -> FaceVectorField {
        self.layout.scatter(x)
    }
}

struct Coefficients {
    /// Multiplies `v` in the time term.
    time: FaceVectorField,
    /// Transport field `w` of `K(w)`.
    transport: FaceVectorField,
    /// Rotation rate, only for the variant without relative flux.
    omega: Option<ScalarField>,
    eta: ScalarField,
    rhs: FaceVectorField,
}

fn coefficients(p: &NsStepProblem) -> Result<Coefficients> {
    let g = p.rho_k.grid;
    for (f, what) in [(p.rho_new, "rho_new"), (p.phi_k, "phi_k"), (p.mu, "mu")] {
        g.check_same(&f.grid, what)?;
    }
    for (f, what) in [(p.jtilde, "J"), (p.v_k, "v_k"), (p.v_transport, "v_transport")] {
        g.check_same(&f.grid, what)?;
    }
    if !(p.h > 0.0) {
        return Err(Error::Validation(format!("time step must be positive, got {}", p.h)));
    }
    let rho_min = p.params.rho1.min(p.params.rho2);
    for &r in p.rho_k.data.iter().chain(&p.rho_new.data) {
        if !(r >= rho_min * (1.0 - 1e-12)) {
            return Err(Error::NonPositiveCoefficient { what: "density", value: r });
        }
    }
    let eta = p.phi_k.map(|s| p.params.viscosity.value(s));
    let cap = ops::capillary_force(p.mu, p.phi_k)?;
    let ih = 1.0 / p.h;

    Ok(match p.params.variant {
        Variant::Agg => {
            let rk = face_density(p.rho_k);
            let rn = face_density(p.rho_new);
            let mut time = rk.clone();
            time.axpy(1.0, &rn);
            let time = time.scaled(0.5 * ih);
            let mut transport = p.v_transport.hadamard(&rk);
            transport.axpy(1.0, p.jtilde);
            let mut rhs = p.v_k.hadamard(&rk).scaled(ih);
            rhs.axpy(1.0, &cap);
            Coefficients { time, transport, omega: None, eta, rhs }
        }
        Variant::Appendix => {
            let rk = face_density(p.rho_k);
            let rn = face_density(p.rho_new);
            let mut rhs = p.v_k.hadamard(&rk).scaled(ih);
            rhs.axpy(1.0, &cap);
            Coefficients {
                time: rn.scaled(ih),
                transport: p.v_transport.hadamard(&rk),
                omega: Some(ops::rotation_rate(p.v_transport, p.rho_k)?),
                eta,
                rhs,
            }
        }
        Variant::ModelH => {
            let rho = p.params.rho1;
            let mut rhs = p.v_k.scaled(rho * ih);
            rhs.axpy(1.0, &cap);
            Coefficients {
                time: FaceVectorField::constant(g, rho * ih, rho * ih),
                transport: p.v_transport.scaled(rho),
                omega: None,
                eta,
                rhs,
            }
        }
    })
}

/// Matrix-free action of the velocity block on `v`.
pub fn momentum_apply(p: &NsStepProblem, v: &FaceVectorField) -> Result<FaceVectorField> {
    let c = coefficients(p)?;
    let mut out = v.hadamard(&c.time);
    out.axpy(1.0, &ops::skew_transport(&c.transport, v)?);
    out.axpy(1.0, &ops::viscous_apply(v, &c.eta)?);
    if let Some(om) = &c.omega {
        out.axpy(-1.0, &ops::rotation_apply(om, v)?);
    }
    out.zero_boundary();
    Ok(out)
}

/// Strain rows `(weight, [(unknown, d strain / d unknown)])` whose weighted sum
/// of squares is the viscous dissipation.
fn strain_rows(l: &Layout, eta: &ScalarField) -> Vec<(f64, Vec<(usize, f64)>)> {
    let g = l.g;
    let vol = g.cell_volume();
    let mut rows = Vec::new();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let w = 2.0 * eta.at(i, j) * vol;
            let mut ex = Vec::new();
            if let Some(k) = l.ux(i + 1, j) {
                ex.push((k, 1.0 / g.hx));
            }
            if let Some(k) = l.ux(i, j) {
                ex.push((k, -1.0 / g.hx));
            }
            rows.push((w, ex));
            let mut ey = Vec::new();
            if let Some(k) = l.uy(i, j + 1) {
                ey.push((k, 1.0 / g.hy));
            }
            if let Some(k) = l.uy(i, j) {
                ey.push((k, -1.0 / g.hy));
            }
            rows.push((w, ey));
        }
    }
    for j in 0..=g.ny {
        for i in 0..=g.nx {
            let mut wn = vol;
            if i == 0 || i == g.nx {
                wn *= 0.5;
            }
            if j == 0 || j == g.ny {
                wn *= 0.5;
            }
            let (mut s, mut n) = (0.0, 0.0);
            for jj in [j.wrapping_sub(1), j] {
                for ii in [i.wrapping_sub(1), i] {
                    if ii < g.nx && jj < g.ny {
                        s += eta.at(ii, jj);
                        n += 1.0;
                    }
                }
            }
            // |D|^2 carries the shear entry twice: 2 eta * 2 exy^2
            let w = 4.0 * (s / n) * wn;
            let mut e = Vec::new();
            let cy = 0.5 / g.hy;
            if j == 0 {
                e.extend(l.ux(i, 0).map(|k| (k, 2.0 * cy)));
            } else if j == g.ny {
                e.extend(l.ux(i, g.ny - 1).map(|k| (k, -2.0 * cy)));
            } else {
                e.extend(l.ux(i, j).map(|k| (k, cy)));
                e.extend(l.ux(i, j - 1).map(|k| (k, -cy)));
            }
            let cx = 0.5 / g.hx;
            if i == 0 {
                e.extend(l.uy(0, j).map(|k| (k, 2.0 * cx)));
            } else if i == g.nx {
                e.extend(l.uy(g.nx - 1, j).map(|k| (k, -2.0 * cx)));
            } else {
                e.extend(l.uy(i, j).map(|k| (k, cx)));
                e.extend(l.uy(i - 1, j).map(|k| (k, -cx)));
            }
            rows.push((w, e));
        }
    }
    rows
}

/// Assemble the pinned saddle-point system.
pub fn assemble_momentum(p: &NsStepProblem) -> Result<SaddleSystem> {
    let c = coefficients(p)?;
    let g = p.rho_k.grid;
    let l = Layout::new(g);
    let (nx, ny, hx, hy) = (g.nx, g.ny, g.hx, g.hy);
    let vol = g.cell_volume();
    let mut t = Triplets::new(l.n_total());
    let w = &c.transport;
    let ks = 0.5 / vol;

    // time term, transport, pressure gradient
    for j in 0..ny {
        for i in 1..nx {
            let r = l.ux(i, j).unwrap();
            t.push(r, r, c.time.xf(i, j));
            if let Some(k) = l.ux(i + 1, j) {
                t.push(r, k, ks * hy * 0.5 * (w.xf(i, j) + w.xf(i + 1, j)));
            }
            if let Some(k) = l.ux(i - 1, j) {
                t.push(r, k, -ks * hy * 0.5 * (w.xf(i - 1, j) + w.xf(i, j)));
            }
            if j + 1 < ny {
                t.push(r, l.ux(i, j + 1).unwrap(), ks * hx * 0.5 * (w.yf(i - 1, j + 1) + w.yf(i, j + 1)));
            }
            if j > 0 {
                t.push(r, l.ux(i, j - 1).unwrap(), -ks * hx * 0.5 * (w.yf(i - 1, j) + w.yf(i, j)));
            }
            t.push(r, l.p(i, j), 1.0 / hx);
            t.push(r, l.p(i - 1, j), -1.0 / hx);
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let r = l.uy(i, j).unwrap();
            t.push(r, r, c.time.yf(i, j));
            if let Some(k) = l.uy(i, j + 1) {
                t.push(r, k, ks * hx * 0.5 * (w.yf(i, j) + w.yf(i, j + 1)));
            }
            if let Some(k) = l.uy(i, j - 1) {
                t.push(r, k, -ks * hx * 0.5 * (w.yf(i, j - 1) + w.yf(i, j)));
            }
            if i + 1 < nx {
                t.push(r, l.uy(i + 1, j).unwrap(), ks * hy * 0.5 * (w.xf(i + 1, j - 1) + w.xf(i + 1, j)));
            }
            if i > 0 {
                t.push(r, l.uy(i - 1, j).unwrap(), -ks * hy * 0.5 * (w.xf(i, j - 1) + w.xf(i, j)));
            }
            t.push(r, l.p(i, j), 1.0 / hy);
            t.push(r, l.p(i, j - 1), -1.0 / hy);
        }
    }

    // viscous block: (1/vol) sum_rows W e e^T
    if c.eta.data.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::NonPositiveCoefficient { what: "viscosity", value: c.eta.min() });
    }
    for (wr, e) in strain_rows(&l, &c.eta) {
        for &(a, ca) in &e {
            for &(b, cb) in &e {
                t.push(a, b, wr / vol * ca * cb);
            }
        }
    }

    // rotation: R_x = (1/4) sum_{cells L,R} omega_c Vbar_c, R_y = -(1/4) sum omega_c Ubar_c
    if let Some(om) = &c.omega {
        for j in 0..ny {
            for i in 1..nx {
                let r = l.ux(i, j).unwrap();
                for ci in [i - 1, i] {
                    let wgt = -0.25 * om.at(ci, j) * 0.5;
                    for k in [l.uy(ci, j), l.uy(ci, j + 1)].into_iter().flatten() {
                        t.push(r, k, wgt);
                    }
                }
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let r = l.uy(i, j).unwrap();
                for cj in [j - 1, j] {
                    let wgt = 0.25 * om.at(i, cj) * 0.5;
                    for k in [l.ux(i, cj), l.ux(i + 1, cj)].into_iter().flatten() {
                        t.push(r, k, wgt);
                    }
                }
            }
        }
    }

    // continuity: -div v = 0, first row pins g
    for j in 0..ny {
        for i in 0..nx {
            let r = l.p(i, j);
            if i == 0 && j == 0 {
                t.push(r, r, 1.0);
                continue;
            }
            if let Some(k) = l.ux(i + 1, j) {
                t.push(r, k, -1.0 / hx);
            }
            if let Some(k) = l.ux(i, j) {
                t.push(r, k, 1.0 / hx);
            }
            if let Some(k) = l.uy(i, j + 1) {
                t.push(r, k, -1.0 / hy);
            }
            if let Some(k) = l.uy(i, j) {
                t.push(r, k, 1.0 / hy);
            }
        }
    }

    let mut rhs = vec![0.0; l.n_total()];
    rhs[..l.n_vel()].copy_from_slice(&l.gather(&c.rhs));
    Ok(SaddleSystem { layout: l, matrix: t, rhs })
}

/// Direct solve of the pinned system; `g` is shifted to mean zero.
pub fn solve_saddle(sys: &SaddleSystem, tol: f64, max_refine: usize) -> Result<NsStepResult> {
    let l = sys.layout;
    let sol = sys.matrix.solve(&sys.rhs, tol, max_refine)?;
    let v = l.scatter(&sol.x[..l.n_vel()]);
    let mut g = ScalarField::from_vec(l.g, sol.x[l.n_vel()..].to_vec())?;
    g.remove_mean();
    let div_inf = ops::div_faces(&v).max_abs();
    if !v.all_finite() || !g.all_finite() {
        return Err(Error::LinearSolveFailed("non-finite solution".into()));
    }
    Ok(NsStepResult { v, g, lin_iters: sol.iters, div_inf, rel_residual: sol.rel_residual })
}

/// Assemble and solve one momentum stage.
pub fn ns_solve(p: &NsStepProblem) -> Result<NsStepResult> {
    let sys = assemble_momentum(p)?;
    solve_saddle(&sys, p.lin_tol, p.lin_max_iter)
}
