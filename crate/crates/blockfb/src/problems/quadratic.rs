//! Shared smooth part of the kernelized duals:
//! `f(u) = 1/2 u^T K u + (ridge_term/2) ||u||^2 - y^T u`.
//!
//! The cache maintains `K u` (one dense row combination per block update) and
//! optionally the primal weights `w = X^T u` when the feature matrix is
//! supplied.

use std::ops::Range;
use std::sync::Arc;

use crate::problems::{SmoothCache, SmoothOracle};
use crate::sparse::DenseMatrix;

pub(crate) struct QuadraticDualOracle {
    pub k: Arc<DenseMatrix>,
    pub y: Arc<Vec<f64>>,
    /// `lambda * m` for ridge, `0` for the box-constrained SVM dual.
    pub ridge_term: f64,
    /// Row-major `m x d` feature matrix whose Gram matrix is `K`.
    pub features: Option<Arc<DenseMatrix>>,
}

impl QuadraticDualOracle {
    fn ku(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.k.nrows()];
        self.k.matvec(u, &mut out);
        out
    }
}

impl SmoothOracle for QuadraticDualOracle {
    fn dim(&self) -> usize {
        self.k.nrows()
    }

    fn value(&self, u: &[f64]) -> f64 {
        let ku = self.ku(u);
        quad_value(u, &ku, &self.y, self.ridge_term)
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        self.k.matvec(u, out);
        for i in 0..u.len() {
            out[i] += self.ridge_term * u[i] - self.y[i];
        }
    }

    fn partial_gradient(&self, u: &[f64], block: Range<usize>, out: &mut [f64]) {
        for (o, i) in out.iter_mut().zip(block) {
            let row_dot: f64 = self.k.row(i).iter().zip(u).map(|(a, b)| a * b).sum();
            *o = row_dot + self.ridge_term * u[i] - self.y[i];
        }
    }

    fn init_cache(&self, u: &[f64]) -> Option<Box<dyn SmoothCache>> {
        let w = self.features.as_ref().map(|x| {
            let mut w = vec![0.0; x.ncols()];
            for i in 0..x.nrows() {
                if u[i] != 0.0 {
                    for (wj, &xij) in w.iter_mut().zip(x.row(i)) {
                        *wj += u[i] * xij;
                    }
                }
            }
            w
        });
        Some(Box::new(QuadraticDualCache {
            k: self.k.clone(),
            y: self.y.clone(),
            ridge_term: self.ridge_term,
            features: self.features.clone(),
            ku: self.ku(u),
            w,
        }))
    }
}

fn quad_value(u: &[f64], ku: &[f64], y: &[f64], ridge_term: f64) -> f64 {
    let mut quad = 0.0;
    let mut sq = 0.0;
    let mut lin = 0.0;
    for i in 0..u.len() {
        quad += u[i] * ku[i];
        sq += u[i] * u[i];
        lin += y[i] * u[i];
    }
    0.5 * quad + 0.5 * ridge_term * sq - lin
}

struct QuadraticDualCache {
    k: Arc<DenseMatrix>,
    y: Arc<Vec<f64>>,
    ridge_term: f64,
    features: Option<Arc<DenseMatrix>>,
    ku: Vec<f64>,
    w: Option<Vec<f64>>,
}

impl SmoothCache for QuadraticDualCache {
    fn partial_gradient(&self, u: &[f64], block: Range<usize>, out: &mut [f64]) {
        for (o, i) in out.iter_mut().zip(block) {
            *o = self.ku[i] + self.ridge_term * u[i] - self.y[i];
        }
    }

    fn apply_block_delta(&mut self, block: Range<usize>, delta: &[f64]) {
        for (i, &d) in block.zip(delta) {
            if d == 0.0 {
                continue;
            }
            // symmetric K: column i equals row i
            for (kj, &kij) in self.ku.iter_mut().zip(self.k.row(i)) {
                *kj += d * kij;
            }
            if let (Some(w), Some(x)) = (self.w.as_mut(), self.features.as_ref()) {
                for (wj, &xij) in w.iter_mut().zip(x.row(i)) {
                    *wj += d * xij;
                }
            }
        }
    }

    fn value(&self, u: &[f64]) -> f64 {
        quad_value(u, &self.ku, &self.y, self.ridge_term)
    }

    fn rebuild(&mut self, u: &[f64]) {
        self.k.matvec(u, &mut self.ku);
        if let (Some(w), Some(x)) = (self.w.as_mut(), self.features.as_ref()) {
            w.fill(0.0);
            for i in 0..x.nrows() {
                if u[i] != 0.0 {
                    for (wj, &xij) in w.iter_mut().zip(x.row(i)) {
                        *wj += u[i] * xij;
                    }
                }
            }
        }
    }

    fn snapshot(&self) -> Vec<f64> {
        let mut snap = self.ku.clone();
        if let Some(w) = &self.w {
            snap.extend_from_slice(w);
        }
        snap
    }

    fn restore(&mut self, snapshot: &[f64]) {
        let m = self.ku.len();
        self.ku.copy_from_slice(&snapshot[..m]);
        if let Some(w) = self.w.as_mut() {
            w.copy_from_slice(&snapshot[m..]);
        }
    }

    fn residual(&self) -> &[f64] {
        &self.ku
    }

    fn primal(&self) -> Option<&[f64]> {
        self.w.as_deref()
    }
}
