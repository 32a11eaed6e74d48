//! Minimal sparse and dense matrix storage for the built-in problems.
//!
//! Lasso keeps the matrix in both compressed forms: columns drive partial
//! gradients and residual updates, rows drive the separability structure.

use crate::error::{Error, Result};

/// Compressed sparse column matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CscMatrix {
    /// Build from (row, col, value) triplets; duplicate entries are summed,
    /// exact zeros dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::InvalidProblem(format!(
                    "triplet ({r},{c}) out of bounds for {nrows}x{ncols}"
                )));
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> =
            triplets.iter().copied().filter(|&(_, _, v)| v != 0.0).collect();
        sorted.sort_by_key(|&(r, c, _)| (c, r));

        // merge duplicates (same row and column)
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(sorted.len());
        for (r, c, v) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }

        let mut col_ptr = vec![0usize; ncols + 1];
        for &(_, c, _) in &merged {
            col_ptr[c + 1] += 1;
        }
        for c in 0..ncols {
            col_ptr[c + 1] += col_ptr[c];
        }
        let row_idx = merged.iter().map(|&(r, _, _)| r).collect();
        let vals = merged.iter().map(|&(_, _, v)| v).collect();
        Ok(Self { nrows, ncols, col_ptr, row_idx, vals })
    }

    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut trip = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::InvalidProblem("ragged dense rows".into()));
            }
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    trip.push((r, c, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &trip)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Sparse column `j` as parallel (row indices, values) slices.
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[r.clone()], &self.vals[r])
    }

    /// `<column j, u>` for a dense `u` of length `nrows`.
    pub fn col_dot(&self, j: usize, u: &[f64]) -> f64 {
        let (idx, vals) = self.col(j);
        idx.iter().zip(vals).map(|(&r, &v)| v * u[r]).sum()
    }

    /// `u += alpha * column j`.
    pub fn col_axpy(&self, j: usize, alpha: f64, u: &mut [f64]) {
        let (idx, vals) = self.col(j);
        for (&r, &v) in idx.iter().zip(vals) {
            u[r] += alpha * v;
        }
    }

    pub fn col_norm_sq(&self, j: usize) -> f64 {
        let (_, vals) = self.col(j);
        vals.iter().map(|v| v * v).sum()
    }

    pub fn col_norms_sq(&self) -> Vec<f64> {
        (0..self.ncols).map(|j| self.col_norm_sq(j)).collect()
    }

    /// `out = A x` (dense, `out.len() == nrows`).
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for j in 0..self.ncols {
            let xj = x[j];
            if xj != 0.0 {
                self.col_axpy(j, xj, out);
            }
        }
    }

    /// `out = A^T u` (dense, `out.len() == ncols`).
    pub fn matvec_transpose(&self, u: &[f64], out: &mut [f64]) {
        for j in 0..self.ncols {
            out[j] = self.col_dot(j, u);
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let mut row_counts = vec![0usize; self.nrows];
        for &r in &self.row_idx {
            row_counts[r] += 1;
        }
        let mut row_ptr = vec![0usize; self.nrows + 1];
        for r in 0..self.nrows {
            row_ptr[r + 1] = row_ptr[r] + row_counts[r];
        }
        let mut col_idx = vec![0usize; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        let mut next = row_ptr.clone();
        for j in 0..self.ncols {
            let (idx, v) = self.col(j);
            for (&r, &x) in idx.iter().zip(v) {
                col_idx[next[r]] = j;
                vals[next[r]] = x;
                next[r] += 1;
            }
        }
        CsrMatrix { nrows: self.nrows, ncols: self.ncols, row_ptr, col_idx, vals }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for j in 0..self.ncols {
            let (idx, vals) = self.col(j);
            for (&r, &v) in idx.iter().zip(vals) {
                out.push((r, j, v));
            }
        }
        out
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, k: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[k]..self.row_ptr[k + 1];
        (&self.col_idx[r.clone()], &self.vals[r])
    }

    pub fn row_dot(&self, k: usize, x: &[f64]) -> f64 {
        let (idx, vals) = self.row(k);
        idx.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
    }

    pub fn row_axpy(&self, k: usize, alpha: f64, x: &mut [f64]) {
        let (idx, vals) = self.row(k);
        for (&c, &v) in idx.iter().zip(vals) {
            x[c] += alpha * v;
        }
    }

    pub fn row_norm_sq(&self, k: usize) -> f64 {
        let (_, vals) = self.row(k);
        vals.iter().map(|v| v * v).sum()
    }

    pub fn row_support(&self, k: usize) -> &[usize] {
        self.row(k).0
    }
}

/// Dense row-major square-or-rectangular matrix, used for Gram matrices and
/// feature matrices of the dual problems.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::DimensionMismatch {
                expected: nrows * ncols,
                got: data.len(),
                context: "DenseMatrix::new",
            });
        }
        Ok(Self { nrows, ncols, data })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, data: vec![0.0; nrows * ncols] }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.ncols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.ncols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.ncols..(r + 1) * self.ncols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        for r in 0..self.nrows {
            for c in (r + 1)..self.ncols {
                let a = self.get(r, c);
                let b = self.get(c, r);
                if (a - b).abs() > tol * (1.0 + a.abs().max(b.abs())) {
                    return false;
                }
            }
        }
        true
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for r in 0..self.nrows {
            out[r] = self.row(r).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// `K = X X^T` for row-major `X` (rows are samples).
    pub fn gram(&self) -> DenseMatrix {
        let m = self.nrows;
        let mut g = DenseMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v: f64 = self.row(i).iter().zip(self.row(j)).map(|(a, b)| a * b).sum();
                g.set(i, j, v);
                g.set(j, i, v);
            }
        }
        g
    }
}
