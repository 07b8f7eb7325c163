//! Staggered (marker-and-cell) grid on a rectangle and the fields living on it.
//!
//! Scalars (`phi`, `mu`, `g`, `rho`) sit at cell centres; velocity components
//! sit on the faces normal to them. Storage is row-major with `x` fastest:
//! cell `(i, j)` is `j * nx + i`, x-face `(i, j)` (at `x = i hx`) is
//! `j * (nx + 1) + i`, y-face `(i, j)` (at `y = j hy`) is `j * nx + i`.
//!
//! Inner products weight every cell and every face by `hx * hy`. Boundary
//! faces carry zero normal velocity and zero normal gradient, so their weight
//! never matters for fields obeying the boundary conditions.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacGrid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub hx: f64,
    pub hy: f64,
}

impl MacGrid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::Validation(format!("grid needs at least 4x4 cells, got {nx}x{ny}")));
        }
        if !(lx > 0.0 && lx.is_finite()) || !(ly > 0.0 && ly.is_finite()) {
            return Err(Error::Validation(format!("domain extents must be positive, got {lx} x {ly}")));
        }
        Ok(MacGrid { nx, ny, lx, ly, hx: lx / nx as f64, hy: ly / ny as f64 })
    }

    pub fn cell_volume(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_xfaces(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn n_yfaces(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn xface(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn yface(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx, (j as f64 + 0.5) * self.hy)
    }

    pub(crate) fn check_same(&self, other: &MacGrid, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::ShapeMismatch(format!(
                "{what}: {}x{} grid vs {}x{} grid",
                self.nx, self.ny, other.nx, other.ny
            )));
        }
        Ok(())
    }
}

/// Cell-centred scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: MacGrid,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: MacGrid) -> Self {
        ScalarField { grid, data: vec![0.0; grid.n_cells()] }
    }

    pub fn constant(grid: MacGrid, c: f64) -> Self {
        ScalarField { grid, data: vec![c; grid.n_cells()] }
    }

    /// Sample `f(x, y)` at cell centres.
    pub fn from_fn(grid: MacGrid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.n_cells());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.cell_center(i, j);
                data.push(f(x, y));
            }
        }
        ScalarField { grid, data }
    }

    pub fn from_vec(grid: MacGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.n_cells() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} cell values, got {}",
                grid.n_cells(),
                data.len()
            )));
        }
        Ok(ScalarField { grid, data })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.grid.nx + i]
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        ScalarField { grid: self.grid, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn try_map(&self, f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        Ok(ScalarField {
            grid: self.grid,
            data: self.data.iter().map(|&x| f(x)).collect::<Result<_>>()?,
        })
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        ScalarField {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn integral(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn dot(&self, other: &ScalarField) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_volume()
    }

    /// Discrete `L2` norm.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn axpy(&mut self, alpha: f64, x: &ScalarField) {
        for (a, b) in self.data.iter_mut().zip(&x.data) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        self.map(|x| alpha * x)
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    /// Subtract the mean so that the integral vanishes.
    pub fn remove_mean(&mut self) {
        let m = self.mean();
        for x in &mut self.data {
            *x -= m;
        }
    }
}

/// Face-centred vector field: `x` on vertical faces, `y` on horizontal faces.
///
/// Also used for face-located scalar coefficients (e.g. mobility on faces).
#[derive(Debug, Clone, PartialEq)]
pub struct FaceVectorField {
    pub grid: MacGrid,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl FaceVectorField {
    pub fn zeros(grid: MacGrid) -> Self {
        FaceVectorField { grid, x: vec![0.0; grid.n_xfaces()], y: vec![0.0; grid.n_yfaces()] }
    }

    pub fn constant(grid: MacGrid, cx: f64, cy: f64) -> Self {
        FaceVectorField { grid, x: vec![cx; grid.n_xfaces()], y: vec![cy; grid.n_yfaces()] }
    }

    /// Sample component functions at their face centres.
    pub fn from_fns(grid: MacGrid, fx: impl Fn(f64, f64) -> f64, fy: impl Fn(f64, f64) -> f64) -> Self {
        let mut v = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..=grid.nx {
                v.x[grid.xface(i, j)] = fx(i as f64 * grid.hx, (j as f64 + 0.5) * grid.hy);
            }
        }
        for j in 0..=grid.ny {
            for i in 0..grid.nx {
                v.y[grid.yface(i, j)] = fy((i as f64 + 0.5) * grid.hx, j as f64 * grid.hy);
            }
        }
        v
    }

    #[inline]
    pub fn xf(&self, i: usize, j: usize) -> f64 {
        self.x[j * (self.grid.nx + 1) + i]
    }

    #[inline]
    pub fn yf(&self, i: usize, j: usize) -> f64 {
        self.y[j * self.grid.nx + i]
    }

    /// Zero every boundary face (normal components on the walls).
    pub fn zero_boundary(&mut self) {
        let g = self.grid;
        for j in 0..g.ny {
            self.x[g.xface(0, j)] = 0.0;
            self.x[g.xface(g.nx, j)] = 0.0;
        }
        for i in 0..g.nx {
            self.y[g.yface(i, 0)] = 0.0;
            self.y[g.yface(i, g.ny)] = 0.0;
        }
    }

    pub fn has_zero_boundary(&self) -> bool {
        let g = self.grid;
        (0..g.ny).all(|j| self.xf(0, j) == 0.0 && self.xf(g.nx, j) == 0.0)
            && (0..g.nx).all(|i| self.yf(i, 0) == 0.0 && self.yf(i, g.ny) == 0.0)
    }

    pub fn dot(&self, other: &FaceVectorField) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let sx: f64 = self.x.iter().zip(&other.x).map(|(a, b)| a * b).sum();
        let sy: f64 = self.y.iter().zip(&other.y).map(|(a, b)| a * b).sum();
        (sx + sy) * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.x.iter().chain(&self.y).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }

    pub fn axpy(&mut self, alpha: f64, other: &FaceVectorField) {
        for (a, b) in self.x.iter_mut().zip(&other.x) {
            *a += alpha * b;
        }
        for (a, b) in self.y.iter_mut().zip(&other.y) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        FaceVectorField {
            grid: self.grid,
            x: self.x.iter().map(|v| alpha * v).collect(),
            y: self.y.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn sub(&self, other: &FaceVectorField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Componentwise product with a face coefficient field.
    pub fn hadamard(&self, coeff: &FaceVectorField) -> Self {
        FaceVectorField {
            grid: self.grid,
            x: self.x.iter().zip(&coeff.x).map(|(a, b)| a * b).collect(),
            y: self.y.iter().zip(&coeff.y).map(|(a, b)| a * b).collect(),
        }
    }
}
