//! Compressed-row matrices and Jacobi-preconditioned conjugate gradients.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Result, WgError};

/// Rows per parallel chunk in [`CsrMatrix::matvec`]; each row is reduced
/// sequentially so the result does not depend on the thread count.
const ROW_CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed in sorted order, so the result is independent of input order
    /// up to the order of equal keys.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |p| vals[p])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        y.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(chunk, ys)| {
            let base = chunk * ROW_CHUNK;
            for (o, yi) in ys.iter_mut().enumerate() {
                let (cols, vals) = self.row(base + o);
                *yi = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
            }
        });
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// Largest `|A_ij - A_ji|` relative to `max |A_ij|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for PcgOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-12, max_iter: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// True relative residual `||b - A x|| / ||b||` of the returned iterate.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn true_residual(a: &CsrMatrix, b: &[f64], x: &[f64], r: &mut [f64]) -> f64 {
    a.matvec(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    norm(r)
}

/// Solves `A x = b` for symmetric positive definite `A` with a diagonal
/// preconditioner. Converged means the recomputed residual satisfies
/// `||b - A x|| <= rel_tol ||b||`; when the recursive residual drifts from
/// the true one the iteration restarts from the current iterate.
pub fn pcg(a: &CsrMatrix, b: &[f64], opts: PcgOptions) -> Result<PcgOutcome> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.len(), n);
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(PcgOutcome { x, iterations: 0, residual: 0.0 });
    }
    let diag = a.diagonal();
    if let Some(&d) = diag.iter().find(|&&d| !(d > 0.0)) {
        return Err(WgError::NotPositiveDefinite { iteration: 0, curvature: d });
    }
    let inv: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let target = opts.rel_tol * bnorm;

    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    let mut rnorm = bnorm;
    loop {
        // (Re)start from the current residual.
        for i in 0..n {
            z[i] = inv[i] * r[i];
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        while rnorm > target {
            if iterations >= opts.max_iter {
                return Err(WgError::Convergence { iterations, residual: rnorm / bnorm });
            }
            a.matvec(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(WgError::NotPositiveDefinite { iteration: iterations, curvature: pap });
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            rnorm = norm(&r);
            for i in 0..n {
                z[i] = inv[i] * r[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        rnorm = true_residual(a, b, &x, &mut r);
        if rnorm <= target {
            return Ok(PcgOutcome { x, iterations, residual: rnorm / bnorm });
        }
        if iterations >= opts.max_iter {
            return Err(WgError::Convergence { iterations, residual: rnorm / bnorm });
        }
    }
}
