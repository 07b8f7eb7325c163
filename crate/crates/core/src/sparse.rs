//! Thin wrapper around a sparse direct solver.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

/// Square sparse matrix in coordinate form; duplicate entries are summed.
#[derive(Debug, Clone)]
pub(crate) struct Triplets {
    n: usize,
    entries: Vec<Triplet<usize, usize, f64>>,
}

/// Outcome of a direct solve with residual refinement.
#[derive(Debug, Clone)]
pub(crate) struct LinearSolution {
    pub x: Vec<f64>,
    pub rel_residual: f64,
    /// One factorisation solve plus any refinement sweeps.
    pub iters: usize,
}

impl Triplets {
    pub fn new(n: usize) -> Self {
        Triplets { n, entries: Vec::with_capacity(8 * n) }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        debug_assert!(row < self.n && col < self.n);
        if val != 0.0 {
            self.entries.push(Triplet::new(row, col, val));
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for t in &self.entries {
            y[t.row] += t.val * x[t.col];
        }
        y
    }

    #[cfg(test)]
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for t in &self.entries {
            a[t.row][t.col] += t.val;
        }
        a
    }

    /// Solve `A x = b` by sparse LU, refining until the relative residual is
    /// below `tol` or `max_refine` extra sweeps have been spent.
    pub fn solve(&self, b: &[f64], tol: f64, max_refine: usize) -> Result<LinearSolution> {
        let n = self.n;
        let bnorm = norm(b);
        if bnorm == 0.0 {
            return Ok(LinearSolution { x: vec![0.0; n], rel_residual: 0.0, iters: 0 });
        }
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &self.entries)
            .map_err(|e| Error::LinearSolveFailed(format!("assembly: {e:?}")))?;
        let lu = a.sp_lu().map_err(|e| Error::LinearSolveFailed(format!("factorisation: {e:?}")))?;

        let solve = |rhs: &[f64]| -> Vec<f64> {
            let r = Mat::from_fn(n, 1, |i, _| rhs[i]);
            let s = lu.solve(&r);
            (0..n).map(|i| s[(i, 0)]).collect()
        };

        let mut x = solve(b);
        let mut iters = 1;
        let mut res = residual(self, &x, b);
        let mut rel = norm(&res) / bnorm;
        while rel > tol && iters <= max_refine {
            let dx = solve(&res);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            iters += 1;
            res = residual(self, &x, b);
            rel = norm(&res) / bnorm;
        }
        if !rel.is_finite() || rel > tol {
            return Err(Error::LinearSolveFailed(format!(
                "relative residual {rel:e} above tolerance {tol:e}"
            )));
        }
        Ok(LinearSolution { x, rel_residual: rel, iters })
    }
}

fn residual(a: &Triplets, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.matvec(x);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_system_solves() {
        let mut t = Triplets::new(3);
        t.push(0, 0, 1.0);
        t.push(0, 0, 1.0);
        t.push(0, 1, 1.0);
        t.push(1, 0, -1.0);
        t.push(1, 1, 3.0);
        t.push(2, 2, 4.0);
        t.push(2, 1, 1.0);
        let x_true = [1.0, -2.0, 0.5];
        let b = t.matvec(&x_true);
        let sol = t.solve(&b, 1e-14, 2).unwrap();
        for (a, b) in sol.x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(t.to_dense()[0][0], 2.0);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let mut t = Triplets::new(2);
        t.push(0, 0, 1.0);
        t.push(1, 1, 1.0);
        let sol = t.solve(&[0.0, 0.0], 1e-12, 1).unwrap();
        assert_eq!(sol.x, vec![0.0, 0.0]);
    }

    #[test]
    fn singular_matrix_is_an_error() {
        let mut t = Triplets::new(2);
        t.push(0, 0, 1.0);
        t.push(1, 0, 1.0);
        assert!(t.solve(&[1.0, 2.0], 1e-12, 1).is_err());
    }
}
