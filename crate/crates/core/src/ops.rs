//! Discrete differential operators on the MAC grid.
//!
//! Everything here is built around one identity, `<div u, p> = -<u, grad p>`
//! for velocity fields with zero normal boundary component. The transport
//! operators are exactly antisymmetric, the viscous operator is the gradient
//! of the strain dissipation, and the advection of a cell scalar is the
//! adjoint of the capillary force. Summing the discrete equations against the
//! discrete unknowns therefore reproduces the energy identity of the
//! continuous model without truncation error.

use crate::error::{Error, Result};
use crate::grid::{FaceVectorField, MacGrid, ScalarField};

fn same_grid(a: &MacGrid, b: &MacGrid, what: &str) -> Result<()> {
    a.check_same(b, what)
}

/// Two-point gradient on interior faces; boundary faces are zero (Neumann).
pub fn grad_cells(p: &ScalarField) -> FaceVectorField {
    let g = p.grid;
    let mut out = FaceVectorField::zeros(g);
    for j in 0..g.ny {
        for i in 1..g.nx {
            out.x[g.xface(i, j)] = (p.at(i, j) - p.at(i - 1, j)) / g.hx;
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            out.y[g.yface(i, j)] = (p.at(i, j) - p.at(i, j - 1)) / g.hy;
        }
    }
    out
}

/// Face-difference divergence per cell.
pub fn div_faces(u: &FaceVectorField) -> ScalarField {
    let g = u.grid;
    let mut out = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            out.data[g.cell(i, j)] =
                (u.xf(i + 1, j) - u.xf(i, j)) / g.hx + (u.yf(i, j + 1) - u.yf(i, j)) / g.hy;
        }
    }
    out
}

/// `div(coeff * grad c)` with homogeneous Neumann conditions.
///
/// Only interior face coefficients are read; they must be positive.
pub fn laplace_neumann(c: &ScalarField, coeff: &FaceVectorField) -> Result<ScalarField> {
    same_grid(&c.grid, &coeff.grid, "laplace_neumann")?;
    check_positive_interior(coeff, "laplacian face coefficient")?;
    let flux = grad_cells(c).hadamard(coeff);
    Ok(div_faces(&flux))
}

pub(crate) fn check_positive_interior(coeff: &FaceVectorField, what: &'static str) -> Result<()> {
    let g = coeff.grid;
    for j in 0..g.ny {
        for i in 1..g.nx {
            let v = coeff.xf(i, j);
            if !(v > 0.0) {
                return Err(Error::NonPositiveCoefficient { what, value: v });
            }
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            let v = coeff.yf(i, j);
            if !(v > 0.0) {
                return Err(Error::NonPositiveCoefficient { what, value: v });
            }
        }
    }
    Ok(())
}

/// Arithmetic mean of the two neighbouring cells; boundary faces copy the
/// single adjacent cell.
pub fn interp_center_to_face(c: &ScalarField) -> FaceVectorField {
    let g = c.grid;
    let mut out = FaceVectorField::zeros(g);
    for j in 0..g.ny {
        for i in 0..=g.nx {
            let l = c.at(i.saturating_sub(1), j);
            let r = c.at(i.min(g.nx - 1), j);
            out.x[g.xface(i, j)] = 0.5 * (l + r);
        }
    }
    for j in 0..=g.ny {
        for i in 0..g.nx {
            let b = c.at(i, j.saturating_sub(1));
            let t = c.at(i, j.min(g.ny - 1));
            out.y[g.yface(i, j)] = 0.5 * (b + t);
        }
    }
    out
}

/// Cell averages of the two face components.
pub fn interp_face_to_center(u: &FaceVectorField) -> (ScalarField, ScalarField) {
    let g = u.grid;
    let mut cx = ScalarField::zeros(g);
    let mut cy = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.cell(i, j);
            cx.data[k] = 0.5 * (u.xf(i, j) + u.xf(i + 1, j));
            cy.data[k] = 0.5 * (u.yf(i, j) + u.yf(i, j + 1));
        }
    }
    (cx, cy)
}

/// Skew-symmetric transport `K(w) v`, the central-flux discretisation of
/// `div(w ⊗ v) - div(w) v / 2` on the velocity control volumes.
///
/// Each face row is `1/(2 hx hy) * sum_e Phi_e v_e` over the four neighbouring
/// faces of the same orientation, with `Phi_e` the outward flux of `w` through
/// the shared control-volume edge. The self term cancels against the
/// divergence correction, which leaves an exactly antisymmetric operator on the
/// interior faces: `<K(w) v, v> = 0` for every `w` and every `v`.
pub fn skew_transport(w: &FaceVectorField, v: &FaceVectorField) -> Result<FaceVectorField> {
    same_grid(&w.grid, &v.grid, "skew transport")?;
    let g = w.grid;
    let (nx, ny, hx, hy) = (g.nx, g.ny, g.hx, g.hy);
    let scale = 0.5 / g.cell_volume();
    let mut out = FaceVectorField::zeros(g);

    for j in 0..ny {
        for i in 1..nx {
            let mut acc = 0.0;
            if i + 1 < nx {
                acc += hy * 0.5 * (w.xf(i, j) + w.xf(i + 1, j)) * v.xf(i + 1, j);
            }
            if i > 1 {
                acc -= hy * 0.5 * (w.xf(i - 1, j) + w.xf(i, j)) * v.xf(i - 1, j);
            }
            if j + 1 < ny {
                acc += hx * 0.5 * (w.yf(i - 1, j + 1) + w.yf(i, j + 1)) * v.xf(i, j + 1);
            }
            if j > 0 {
                acc -= hx * 0.5 * (w.yf(i - 1, j) + w.yf(i, j)) * v.xf(i, j - 1);
            }
            out.x[g.xface(i, j)] = scale * acc;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let mut acc = 0.0;
            if j + 1 < ny {
                acc += hx * 0.5 * (w.yf(i, j) + w.yf(i, j + 1)) * v.yf(i, j + 1);
            }
            if j > 1 {
                acc -= hx * 0.5 * (w.yf(i, j - 1) + w.yf(i, j)) * v.yf(i, j - 1);
            }
            if i + 1 < nx {
                acc += hy * 0.5 * (w.xf(i + 1, j - 1) + w.xf(i + 1, j)) * v.yf(i + 1, j);
            }
            if i > 0 {
                acc -= hy * 0.5 * (w.xf(i, j - 1) + w.xf(i, j)) * v.yf(i - 1, j);
            }
            out.y[g.yface(i, j)] = scale * acc;
        }
    }
    Ok(out)
}

/// Convective term `C(w; v) = div(w ⊗ v) - div(w) v / 2` for the transport
/// mass flux `w = rho_k v_transport`.
pub fn skew_convection(mass_flux: &FaceVectorField, v: &FaceVectorField) -> Result<FaceVectorField> {
    skew_transport(mass_flux, v)
}

/// Relative-flux term `T(J; v) = (J . grad) v + div(J) v / 2`.
///
/// In divergence form this is the same central-flux operator as the
/// convective term, so it shares the implementation.
pub fn skew_flux_term(jt: &FaceVectorField, v: &FaceVectorField) -> Result<FaceVectorField> {
    skew_transport(jt, v)
}

/// Viscosity at grid nodes: mean over the adjacent cells.
fn node_eta(eta: &ScalarField, i: usize, j: usize) -> f64 {
    let g = eta.grid;
    let mut s = 0.0;
    let mut n = 0usize;
    for jj in [j.wrapping_sub(1), j] {
        for ii in [i.wrapping_sub(1), i] {
            if ii < g.nx && jj < g.ny {
                s += eta.at(ii, jj);
                n += 1;
            }
        }
    }
    s / n as f64
}

/// Quadrature weight of node `(i, j)`: halved on walls, quartered at corners.
fn node_weight(g: &MacGrid, i: usize, j: usize) -> f64 {
    let mut w = g.cell_volume();
    if i == 0 || i == g.nx {
        w *= 0.5;
    }
    if j == 0 || j == g.ny {
        w *= 0.5;
    }
    w
}

/// Shear strain `(du/dy + dv/dx)/2` at node `(i, j)` with reflected ghosts
/// outside the walls.
fn node_shear(v: &FaceVectorField, i: usize, j: usize) -> f64 {
    let g = v.grid;
    let lower = if j == 0 { -v.xf(i, 0) } else { v.xf(i, j - 1) };
    let upper = if j == g.ny { -v.xf(i, g.ny - 1) } else { v.xf(i, j) };
    let left = if i == 0 { -v.yf(0, j) } else { v.yf(i - 1, j) };
    let right = if i == g.nx { -v.yf(g.nx - 1, j) } else { v.yf(i, j) };
    0.5 * ((upper - lower) / g.hy + (right - left) / g.hx)
}

fn check_eta(eta: &ScalarField) -> Result<()> {
    match eta.data.iter().find(|&&e| !(e > 0.0)) {
        Some(&e) => Err(Error::NonPositiveCoefficient { what: "viscosity", value: e }),
        None => Ok(()),
    }
}

/// `sum 2 eta |D_h v|^2` over the grid, with `D_h v` the symmetric gradient:
/// normal strains at cell centres, shear strain at nodes.
pub fn strain_dissipation(v: &FaceVectorField, eta: &ScalarField) -> Result<f64> {
    same_grid(&v.grid, &eta.grid, "strain dissipation")?;
    check_eta(eta)?;
    let g = v.grid;
    let vol = g.cell_volume();
    let mut cells = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let exx = (v.xf(i + 1, j) - v.xf(i, j)) / g.hx;
            let eyy = (v.yf(i, j + 1) - v.yf(i, j)) / g.hy;
            cells += 2.0 * eta.at(i, j) * (exx * exx + eyy * eyy) * vol;
        }
    }
    let mut nodes = 0.0;
    for j in 0..=g.ny {
        for i in 0..=g.nx {
            let exy = node_shear(v, i, j);
            // |D|^2 counts the off-diagonal entry twice
            nodes += node_weight(&g, i, j) * 2.0 * node_eta(eta, i, j) * 2.0 * exy * exy;
        }
    }
    Ok(cells + nodes)
}

/// Viscous operator `-div(2 eta D_h v)` on interior faces, scaled so that
/// `<viscous_apply(v), v> = strain_dissipation(v)` for no-slip `v`.
pub fn viscous_apply(v: &FaceVectorField, eta: &ScalarField) -> Result<FaceVectorField> {
    same_grid(&v.grid, &eta.grid, "viscous operator")?;
    check_eta(eta)?;
    let g = v.grid;
    let vol = g.cell_volume();
    let mut out = FaceVectorField::zeros(g);

    for j in 0..g.ny {
        for i in 0..g.nx {
            let e = 2.0 * eta.at(i, j);
            let sxx = e * (v.xf(i + 1, j) - v.xf(i, j)) / g.hx / g.hx;
            out.x[g.xface(i + 1, j)] += sxx;
            out.x[g.xface(i, j)] -= sxx;
            let syy = e * (v.yf(i, j + 1) - v.yf(i, j)) / g.hy / g.hy;
            out.y[g.yface(i, j + 1)] += syy;
            out.y[g.yface(i, j)] -= syy;
        }
    }
    for j in 0..=g.ny {
        for i in 0..=g.nx {
            let s = node_weight(&g, i, j) / vol * 4.0 * node_eta(eta, i, j) * node_shear(v, i, j);
            // d(exy)/d(face) for each face entering the node stencil
            let cy = 0.5 / g.hy;
            if j == 0 {
                out.x[g.xface(i, 0)] += 2.0 * cy * s;
            } else if j == g.ny {
                out.x[g.xface(i, g.ny - 1)] -= 2.0 * cy * s;
            } else {
                out.x[g.xface(i, j)] += cy * s;
                out.x[g.xface(i, j - 1)] -= cy * s;
            }
            let cx = 0.5 / g.hx;
            if i == 0 {
                out.y[g.yface(0, j)] += 2.0 * cx * s;
            } else if i == g.nx {
                out.y[g.yface(g.nx - 1, j)] -= 2.0 * cx * s;
            } else {
                out.y[g.yface(i, j)] += cx * s;
                out.y[g.yface(i - 1, j)] -= cx * s;
            }
        }
    }
    out.zero_boundary();
    Ok(out)
}

/// Discrete `v . grad(phi)` at cells: the mean over the four cell faces of
/// the face velocity times the face gradient.
pub fn advection(v: &FaceVectorField, phi: &ScalarField) -> Result<ScalarField> {
    same_grid(&v.grid, &phi.grid, "advection")?;
    let g = v.grid;
    let gp = grad_cells(phi);
    let mut out = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            out.data[g.cell(i, j)] = 0.5
                * (v.xf(i, j) * gp.xf(i, j)
                    + v.xf(i + 1, j) * gp.xf(i + 1, j)
                    + v.yf(i, j) * gp.yf(i, j)
                    + v.yf(i, j + 1) * gp.yf(i, j + 1));
        }
    }
    Ok(out)
}

/// Capillary force `mu grad(phi)` on faces, the exact adjoint of
/// [`advection`]: `(advection(v, phi), mu) = <v, capillary_force(mu, phi)>`.
pub fn capillary_force(mu: &ScalarField, phi: &ScalarField) -> Result<FaceVectorField> {
    same_grid(&mu.grid, &phi.grid, "capillary force")?;
    Ok(grad_cells(phi).hadamard(&interp_center_to_face(mu)))
}

/// Cell-centred gradient: the mean of the two face gradients in each
/// direction.
pub fn cell_gradient(p: &ScalarField) -> (ScalarField, ScalarField) {
    interp_face_to_center(&grad_cells(p))
}

/// `|v|^2 / 2` at cells, formed as a quarter of the sum of the four squared
/// face values. With face densities taken as cell means this gives
/// `sum_c rho_c k_c = sum_f rho_f |v_f|^2 / 2` exactly.
pub fn kinetic_density(v: &FaceVectorField) -> ScalarField {
    let g = v.grid;
    let mut out = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let (a, b, c, d) = (v.xf(i, j), v.xf(i + 1, j), v.yf(i, j), v.yf(i, j + 1));
            out.data[g.cell(i, j)] = 0.25 * (a * a + b * b + c * c + d * d);
        }
    }
    out
}

/// Scalar rotation rate `omega = v_y d(rho)/dx - v_x d(rho)/dy` at cells.
pub fn rotation_rate(v: &FaceVectorField, rho: &ScalarField) -> Result<ScalarField> {
    same_grid(&v.grid, &rho.grid, "rotation rate")?;
    let (ux, uy) = interp_face_to_center(v);
    let (rx, ry) = cell_gradient(rho);
    Ok(ScalarField {
        grid: v.grid,
        data: (0..ux.data.len()).map(|k| uy.data[k] * rx.data[k] - ux.data[k] * ry.data[k]).collect(),
    })
}

/// Energy-neutral rotation `(omega / 2) (v_y, -v_x)`, averaged from cells to
/// interior faces. `<rotation_apply(omega, v), v> = 0` for no-slip `v`.
pub fn rotation_apply(omega: &ScalarField, v: &FaceVectorField) -> Result<FaceVectorField> {
    same_grid(&omega.grid, &v.grid, "rotation")?;
    let g = v.grid;
    let (ux, uy) = interp_face_to_center(v);
    let mut out = FaceVectorField::zeros(g);
    for j in 0..g.ny {
        for i in 1..g.nx {
            let l = omega.at(i - 1, j) * uy.at(i - 1, j);
            let r = omega.at(i, j) * uy.at(i, j);
            out.x[g.xface(i, j)] = 0.25 * (l + r);
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            let b = omega.at(i, j - 1) * ux.at(i, j - 1);
            let t = omega.at(i, j) * ux.at(i, j);
            out.y[g.yface(i, j)] = -0.25 * (b + t);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn grid() -> MacGrid {
        MacGrid::new(7, 5, 1.4, 0.9).unwrap()
    }

    fn rand_cells(g: MacGrid, rng: &mut StdRng) -> ScalarField {
        ScalarField { grid: g, data: (0..g.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect() }
    }

    fn rand_faces(g: MacGrid, rng: &mut StdRng) -> FaceVectorField {
        let mut v = FaceVectorField {
            grid: g,
            x: (0..g.n_xfaces()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            y: (0..g.n_yfaces()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        v.zero_boundary();
        v
    }

    #[test]
    fn constants_are_in_kernels() {
        let g = grid();
        let c = ScalarField::constant(g, 2.5);
        assert_eq!(grad_cells(&c).max_abs(), 0.0);
        let coeff = FaceVectorField::constant(g, 1.0, 1.0);
        assert_eq!(laplace_neumann(&c, &coeff).unwrap().max_abs(), 0.0);
        let u = FaceVectorField::constant(g, 3.0, -1.0);
        let d = div_faces(&u);
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                assert_eq!(d.at(i, j), 0.0);
            }
        }
    }

    #[test]
    fn linear_field_gradient_is_exact() {
        let g = grid();
        let p = ScalarField::from_fn(g, |x, _| x);
        let gp = grad_cells(&p);
        for j in 0..g.ny {
            for i in 1..g.nx {
                assert!((gp.xf(i, j) - 1.0).abs() < 1e-13);
            }
        }
        assert_eq!(gp.xf(0, 0), 0.0);
    }

    #[test]
    fn interpolation_preserves_constants_and_linears() {
        let g = grid();
        let c = ScalarField::constant(g, -0.7);
        let f = interp_center_to_face(&c);
        assert!(f.x.iter().chain(&f.y).all(|&v| v == -0.7));
        let lin = ScalarField::from_fn(g, |x, y| 2.0 * x - y);
        let f = interp_center_to_face(&lin);
        let exact = FaceVectorField::from_fns(g, |x, y| 2.0 * x - y, |x, y| 2.0 * x - y);
        for j in 0..g.ny {
            for i in 1..g.nx {
                assert!((f.xf(i, j) - exact.xf(i, j)).abs() < 1e-13);
            }
        }
        let u = FaceVectorField::from_fns(g, |x, _| x, |_, y| 3.0 * y);
        let (cx, cy) = interp_face_to_center(&u);
        let (x, y) = g.cell_center(2, 3);
        assert!((cx.at(2, 3) - x).abs() < 1e-13);
        assert!((cy.at(2, 3) - 3.0 * y).abs() < 1e-13);
    }

    #[test]
    fn laplacian_rejects_nonpositive_coefficient() {
        let g = grid();
        let mut coeff = FaceVectorField::constant(g, 1.0, 1.0);
        coeff.x[g.xface(3, 2)] = 0.0;
        let c = ScalarField::zeros(g);
        assert!(matches!(laplace_neumann(&c, &coeff), Err(Error::NonPositiveCoefficient { .. })));
        // boundary coefficients are never read
        let mut coeff = FaceVectorField::constant(g, 1.0, 1.0);
        coeff.x[g.xface(0, 2)] = -1.0;
        assert!(laplace_neumann(&c, &coeff).is_ok());
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let a = FaceVectorField::zeros(grid());
        let b = FaceVectorField::zeros(MacGrid::new(4, 4, 1.0, 1.0).unwrap());
        assert!(matches!(skew_transport(&a, &b), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn summation_by_parts() {
        let g = grid();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..100 {
            let u = rand_faces(g, &mut rng);
            let p = rand_cells(g, &mut rng);
            let lhs = div_faces(&u).dot(&p);
            let rhs = -u.dot(&grad_cells(&p));
            let scale = u.norm() * grad_cells(&p).norm();
            assert!((lhs - rhs).abs() <= 1e-13 * scale, "{lhs} {rhs}");
            assert!(div_faces(&u).integral().abs() <= 1e-13 * u.norm());
        }
    }

    #[test]
    fn laplacian_symmetric_and_conservative() {
        let g = grid();
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..100 {
            let c = rand_cells(g, &mut rng);
            let d = rand_cells(g, &mut rng);
            let coeff = interp_center_to_face(&rand_cells(g, &mut rng).map(|x| 1.5 + x));
            let lc = laplace_neumann(&c, &coeff).unwrap();
            let ld = laplace_neumann(&d, &coeff).unwrap();
            let scale = lc.norm() * d.norm() + ld.norm() * c.norm();
            assert!((lc.dot(&d) - c.dot(&ld)).abs() <= 1e-13 * scale);
            assert!(lc.integral().abs() <= 1e-13 * lc.norm() * g.area().sqrt());
            assert!(lc.dot(&c) <= 1e-13 * scale);
        }
    }

    #[test]
    fn transport_operators_annihilate() {
        let g = grid();
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..200 {
            let w = rand_faces(g, &mut rng);
            let v = rand_faces(g, &mut rng);
            let bound = 1e-13 * w.norm() * v.dot(&v);
            assert!(skew_convection(&w, &v).unwrap().dot(&v).abs() <= bound);
            assert!(skew_flux_term(&w, &v).unwrap().dot(&v).abs() <= bound);
        }
        let w = rand_faces(g, &mut rng);
        assert_eq!(skew_transport(&w, &FaceVectorField::zeros(g)).unwrap().max_abs(), 0.0);
        assert_eq!(skew_transport(&FaceVectorField::zeros(g), &w).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn transport_of_constant_by_uniform_flow_vanishes_inside() {
        // div(w ⊗ v) - div(w) v / 2 = 0 for constant w and v
        let g = MacGrid::new(8, 8, 1.0, 1.0).unwrap();
        let w = FaceVectorField::constant(g, 1.0, 0.5);
        let v = FaceVectorField::constant(g, 2.0, -1.0);
        let k = skew_transport(&w, &v).unwrap();
        for j in 2..g.ny - 2 {
            for i in 2..g.nx - 2 {
                assert!(k.xf(i, j).abs() < 1e-12);
                assert!(k.yf(i, j).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transport_approximates_convective_derivative() {
        // w = (1, 0), v_x = sin(pi y): (w . grad) v = 0; v_x = x: (w . grad) v_x = 1
        let g = MacGrid::new(16, 16, 1.0, 1.0).unwrap();
        let w = FaceVectorField::constant(g, 1.0, 0.0);
        let v = FaceVectorField::from_fns(g, |x, _| x, |_, _| 0.0);
        let k = skew_transport(&w, &v).unwrap();
        for j in 0..g.ny {
            for i in 2..g.nx - 1 {
                assert!((k.xf(i, j) - 1.0).abs() < 1e-12, "{}", k.xf(i, j));
            }
        }
    }

    #[test]
    fn viscous_operator_is_gradient_of_dissipation() {
        let g = grid();
        let mut rng = StdRng::seed_from_u64(14);
        for _ in 0..20 {
            let v = rand_faces(g, &mut rng);
            let w = rand_faces(g, &mut rng);
            let eta = rand_cells(g, &mut rng).map(|x| 1.2 + x);
            let q = strain_dissipation(&v, &eta).unwrap();
            let av = viscous_apply(&v, &eta).unwrap();
            assert!((av.dot(&v) - q).abs() <= 1e-12 * q);
            assert!(q >= 0.0);
            // symmetry of the bilinear form
            let aw = viscous_apply(&w, &eta).unwrap();
            assert!((av.dot(&w) - aw.dot(&v)).abs() <= 1e-12 * (q + aw.dot(&w)));
            let q2 = strain_dissipation(&v.scaled(2.0), &eta).unwrap();
            assert!((q2 - 4.0 * q).abs() <= 1e-12 * q2);
        }
    }

    #[test]
    fn dissipation_of_uniform_shear_by_hand() {
        // u = y - Ly/2 on interior x-faces of a 4x4 unit grid, eta = 1.
        // Interior nodes see du/dy = 1; wall nodes see the reflected ghost.
        let g = MacGrid::new(4, 4, 1.0, 1.0).unwrap();
        let mut v = FaceVectorField::from_fns(g, |_, y| y - 0.5, |_, _| 0.0);
        v.zero_boundary();
        let eta = ScalarField::constant(g, 1.0);
        let q = strain_dissipation(&v, &eta).unwrap();
        // rows j = 1..3: exy = 1/2 at 3 interior x-node columns (i = 1..3),
        // wall rows j = 0, 4: ghost gives du/dy = 2*(0.375)/0.25 = 3, exy = 1.5.
        let h2 = 1.0 / 16.0;
        let interior = 3.0 * 3.0 * h2 * 4.0 * 0.25;
        let walls = 2.0 * 3.0 * (0.5 * h2) * 4.0 * 2.25;
        // cells next to the vertical walls see exx = ±u/hx; sum of u^2/hx^2 over a column is 5
        let cells = 2.0 * 2.0 * 5.0 * h2;
        assert!((q - (interior + walls + cells)).abs() < 1e-14, "{q}");
    }

    #[test]
    fn capillary_is_adjoint_of_advection() {
        let g = grid();
        let mut rng = StdRng::seed_from_u64(15);
        for _ in 0..100 {
            let v = rand_faces(g, &mut rng);
            let phi = rand_cells(g, &mut rng);
            let mu = rand_cells(g, &mut rng);
            let a = advection(&v, &phi).unwrap().dot(&mu);
            let b = v.dot(&capillary_force(&mu, &phi).unwrap());
            assert!((a - b).abs() <= 1e-13 * (1.0 + a.abs()) * v.norm() * mu.norm() * 10.0);
        }
    }

    #[test]
    fn advection_of_divergence_free_flow_is_conservative() {
        let g = grid();
        let mut rng = StdRng::seed_from_u64(16);
        // discrete curl of a node stream function is divergence free
        let psi: Vec<f64> = (0..(g.nx + 1) * (g.ny + 1)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = |i: usize, j: usize| {
            if i == 0 || j == 0 || i == g.nx || j == g.ny { 0.0 } else { psi[j * (g.nx + 1) + i] }
        };
        let mut v = FaceVectorField::zeros(g);
        for j in 0..g.ny {
            for i in 0..=g.nx {
                v.x[g.xface(i, j)] = (s(i, j + 1) - s(i, j)) / g.hy;
            }
        }
        for j in 0..=g.ny {
            for i in 0..g.nx {
                v.y[g.yface(i, j)] = -(s(i + 1, j) - s(i, j)) / g.hx;
            }
        }
        assert!(div_faces(&v).max_abs() < 1e-12);
        let phi = rand_cells(g, &mut rng);
        let a = advection(&v, &phi).unwrap();
        assert!(a.integral().abs() < 1e-12 * a.norm());
    }

    #[test]
    fn rotation_is_energy_neutral() {
        let g = grid();
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..100 {
            let v = rand_faces(g, &mut rng);
            let vt = rand_faces(g, &mut rng);
            let rho = rand_cells(g, &mut rng).map(|x| 2.0 + x);
            let om = rotation_rate(&vt, &rho).unwrap();
            let r = rotation_apply(&om, &v).unwrap();
            assert!(r.dot(&v).abs() <= 1e-13 * r.norm() * v.norm() + 1e-300);
        }
    }

    #[test]
    fn kinetic_density_matches_face_sum() {
        let g = grid();
        let mut rng = StdRng::seed_from_u64(18);
        let v = rand_faces(g, &mut rng);
        let rho = rand_cells(g, &mut rng).map(|x| 2.0 + x);
        let rf = interp_center_to_face(&rho);
        let lhs = rho.dot(&kinetic_density(&v));
        let rhs = 0.5 * v.hadamard(&rf).dot(&v);
        assert!((lhs - rhs).abs() < 1e-13 * lhs);
    }

    proptest! {
        #[test]
        fn operators_are_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let g = MacGrid::new(5, 6, 1.0, 1.2).unwrap();
            let mut rng = StdRng::seed_from_u64(seed);
            let u = rand_faces(g, &mut rng);
            let w = rand_faces(g, &mut rng);
            let tr = rand_faces(g, &mut rng);
            let p = rand_cells(g, &mut rng);
            let q = rand_cells(g, &mut rng);
            let eta = rand_cells(g, &mut rng).map(|x| 1.5 + x);
            let mut comb = u.scaled(a);
            comb.axpy(b, &w);
            let mut pc = p.scaled(a);
            pc.axpy(b, &q);

            let lin_f = |f: &dyn Fn(&FaceVectorField) -> FaceVectorField| {
                let mut e = f(&u).scaled(a);
                e.axpy(b, &f(&w));
                let d = f(&comb).sub(&e);
                d.max_abs() <= 1e-12 * (1.0 + e.max_abs())
            };
            prop_assert!(lin_f(&|x| skew_transport(&tr, x).unwrap()));
            prop_assert!(lin_f(&|x| viscous_apply(x, &eta).unwrap()));
            let mut e = div_faces(&u).scaled(a);
            e.axpy(b, &div_faces(&w));
            prop_assert!(div_faces(&comb).sub(&e).max_abs() <= 1e-12 * (1.0 + e.max_abs()));
            let mut e = grad_cells(&p).scaled(a);
            e.axpy(b, &grad_cells(&q));
            prop_assert!(grad_cells(&pc).sub(&e).max_abs() <= 1e-12 * (1.0 + e.max_abs()));
        }
    }
}
