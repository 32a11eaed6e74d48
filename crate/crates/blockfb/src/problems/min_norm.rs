//! Minimal-norm solution of a consistent linear system `A x = b` through its
//! dual `min_u 1/2 ||A^T u||^2 - <u, b>`.
//!
//! The primal iterate `x = A^T u` is exactly the cached vector, updated
//! incrementally as `x += delta_i a_i`; with a serial sampling and
//! `gamma_i ||a_i||^2 = 1` every step solves the selected equation, which is
//! the randomized Kaczmarz method.

use std::ops::Range;
use std::sync::Arc;

use crate::block::BlockPartition;
use crate::error::{Error, Result};
use crate::problems::{CompositeProblem, SmoothCache, SmoothOracle, StrongConvexity, ZeroProx};
use crate::smoothness::SeparabilityStructure;
use crate::sparse::{CscMatrix, CsrMatrix};

struct MinNormOracle {
    /// `m x p`, rows are the equations.
    a: Arc<CscMatrix>,
    rows: Arc<CsrMatrix>,
    b: Arc<Vec<f64>>,
}

impl MinNormOracle {
    fn primal_at(&self, u: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.a.ncols()];
        self.a.matvec_transpose(u, &mut x);
        x
    }
}

impl SmoothOracle for MinNormOracle {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn value(&self, u: &[f64]) -> f64 {
        let x = self.primal_at(u);
        let quad: f64 = x.iter().map(|v| v * v).sum();
        let lin: f64 = u.iter().zip(self.b.iter()).map(|(a, b)| a * b).sum();
        0.5 * quad - lin
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        let x = self.primal_at(u);
        self.a.matvec(&x, out);
        for (o, bi) in out.iter_mut().zip(self.b.iter()) {
            *o -= bi;
        }
    }

    fn partial_gradient(&self, u: &[f64], block: Range<usize>, out: &mut [f64]) {
        let x = self.primal_at(u);
        for (o, i) in out.iter_mut().zip(block) {
            *o = self.rows.row_dot(i, &x) - self.b[i];
        }
    }

    fn init_cache(&self, u: &[f64]) -> Option<Box<dyn SmoothCache>> {
        Some(Box::new(MinNormCache {
            rows: self.rows.clone(),
            b: self.b.clone(),
            primal: self.primal_at(u),
        }))
    }
}

struct MinNormCache {
    rows: Arc<CsrMatrix>,
    b: Arc<Vec<f64>>,
    primal: Vec<f64>,
}

impl SmoothCache for MinNormCache {
    fn partial_gradient(&self, _u: &[f64], block: Range<usize>, out: &mut [f64]) {
        for (o, i) in out.iter_mut().zip(block) {
            *o = self.rows.row_dot(i, &self.primal) - self.b[i];
        }
    }

    fn apply_block_delta(&mut self, block: Range<usize>, delta: &[f64]) {
        for (i, &d) in block.zip(delta) {
            if d != 0.0 {
                self.rows.row_axpy(i, d, &mut self.primal);
            }
        }
    }

    fn value(&self, u: &[f64]) -> f64 {
        let quad: f64 = self.primal.iter().map(|v| v * v).sum();
        let lin: f64 = u.iter().zip(self.b.iter()).map(|(a, b)| a * b).sum();
        0.5 * quad - lin
    }

    fn rebuild(&mut self, u: &[f64]) {
        self.primal.fill(0.0);
        for i in 0..self.rows.nrows() {
            if u[i] != 0.0 {
                self.rows.row_axpy(i, u[i], &mut self.primal);
            }
        }
    }

    fn snapshot(&self) -> Vec<f64> {
        self.primal.clone()
    }

    fn restore(&mut self, snapshot: &[f64]) {
        self.primal.copy_from_slice(snapshot);
    }

    fn residual(&self) -> &[f64] {
        &self.primal
    }

    fn primal(&self) -> Option<&[f64]> {
        Some(&self.primal)
    }
}

/// Build the dual of the minimal-norm problem for an `m x p` matrix whose
/// rows are the equations. `b` must lie in the range of `A`
/// (caller-asserted; violations surface as a nonvanishing residual).
pub fn make_min_norm_dual(a: CscMatrix, b: Vec<f64>) -> Result<CompositeProblem> {
    let m = a.nrows();
    if b.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: b.len(), context: "min_norm rhs" });
    }
    let rows = a.to_csr();
    let mut block_l = Vec::with_capacity(m);
    for i in 0..m {
        let l = rows.row_norm_sq(i);
        if l == 0.0 {
            return Err(Error::InvalidProblem(format!(
                "row {i} of the system is identically zero; drop it before solving (every \
                 block must have positive selection probability and L_i > 0)"
            )));
        }
        block_l.push(l);
    }

    // groups are the columns: g_k(u) = 1/2 <a^k, u>^2
    let mut index_sets = Vec::new();
    let mut group_l = Vec::new();
    let mut table = Vec::new();
    for k in 0..a.ncols() {
        let (idx, vals) = a.col(k);
        if idx.is_empty() {
            continue;
        }
        index_sets.push(idx.to_vec());
        group_l.push(vals.iter().map(|v| v * v).sum());
        table.push(vals.iter().map(|v| v * v).collect());
    }
    let structure = SeparabilityStructure::new(m, index_sets, block_l)?
        .with_group_lipschitz(group_l.clone())?
        .with_per_group_block_lipschitz(table)?;

    // nu_i = sum over columns touching block i of the column norm
    let mut s3 = vec![0.0; m];
    for (k, set) in structure.index_sets().iter().enumerate() {
        for &i in set {
            s3[i] += structure.group_lipschitz().unwrap()[k];
        }
    }

    let rows = Arc::new(rows);
    Ok(CompositeProblem {
        smooth: Arc::new(MinNormOracle { a: Arc::new(a), rows, b: Arc::new(b) }),
        prox: Arc::new(ZeroProx),
        partition: Arc::new(BlockPartition::scalar(m)?),
        structure,
        s3_column_norms: Some(s3),
        strong_convexity: StrongConvexity::default(),
        f_star: None,
        reference_solution: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::finite_difference_gradient;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_csc(rows: &[Vec<f64>]) -> CscMatrix {
        CscMatrix::from_dense_rows(rows).unwrap()
    }

    #[test]
    fn rejects_zero_rows() {
        let a = dense_csc(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert!(make_min_norm_dual(a, vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn gradient_and_cache_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> =
            (0..6).map(|_| (0..9).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let b: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let prob = make_min_norm_dual(dense_csc(&rows), b).unwrap();

        let mut u: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut grad = vec![0.0; 6];
        prob.smooth.gradient(&u, &mut grad);
        let fd = finite_difference_gradient(prob.smooth.as_ref(), &u, 1e-6);
        for (g, f) in grad.iter().zip(&fd) {
            assert!((g - f).abs() <= 1e-5 * (1.0 + g.abs()));
        }

        let mut cache = prob.smooth.init_cache(&u).unwrap();
        for _ in 0..2000 {
            let i = rng.random_range(0..6);
            let d: f64 = rng.random_range(-0.05..0.05);
            u[i] += d;
            cache.apply_block_delta(i..i + 1, &[d]);
        }
        prob.smooth.gradient(&u, &mut grad);
        let mut pg = [0.0];
        for i in 0..6 {
            cache.partial_gradient(&u, i..i + 1, &mut pg);
            assert!((pg[0] - grad[i]).abs() <= 1e-10 * (1.0 + grad[i].abs()));
        }
        assert!(
            (cache.value(&u) - prob.smooth.value(&u)).abs()
                <= 1e-10 * (1.0 + prob.smooth.value(&u).abs())
        );
    }

    #[test]
    fn orthonormal_rows_decouple() {
        // A = I: dual gradient block i is x_i - b_i with x = u, so one pass
        // with gamma_i = 1 lands exactly on the solution x* = b.
        let m = 5;
        let a = dense_csc(
            &(0..m)
                .map(|i| {
                    let mut r = vec![0.0; m];
                    r[i] = 1.0;
                    r
                })
                .collect::<Vec<_>>(),
        );
        let b = vec![3.0, -1.0, 0.5, 2.0, 0.0];
        let prob = make_min_norm_dual(a, b.clone()).unwrap();
        let mut u = vec![0.0; m];
        let mut cache = prob.smooth.init_cache(&u).unwrap();
        let mut g = [0.0];
        for i in 0..m {
            cache.partial_gradient(&u, i..i + 1, &mut g);
            let delta = -g[0]; // gamma_i = 1/||a_i||^2 = 1
            u[i] += delta;
            cache.apply_block_delta(i..i + 1, &[delta]);
        }
        let x = cache.primal().unwrap();
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-14);
        }
    }

    #[test]
    fn dual_gap_dominates_primal_distance() {
        // 1/2 ||x - x*||^2 <= D(u) - inf D with x = A^T u
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rows: Vec<Vec<f64>> =
            (0..4).map(|_| (0..7).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let a = dense_csc(&rows);
        // consistent rhs
        let xtrue: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut b = vec![0.0; 4];
        a.matvec(&xtrue, &mut b);
        let prob = make_min_norm_dual(a.clone(), b.clone()).unwrap();

        // minimal-norm solution via the normal equations on A A^T
        let mut aat = nalgebra::DMatrix::zeros(4, 4);
        let rows_csr = a.to_csr();
        for i in 0..4 {
            for j in 0..4 {
                let mut row_j = vec![0.0; 7];
                rows_csr.row_axpy(j, 1.0, &mut row_j);
                aat[(i, j)] = rows_csr.row_dot(i, &row_j);
            }
        }
        let rhs = nalgebra::DVector::from_vec(b.clone());
        let w = aat.svd(true, true).solve(&rhs, 1e-12).unwrap();
        let mut xstar = vec![0.0; 7];
        a.matvec_transpose(w.as_slice(), &mut xstar);

        let inf_d = {
            let u: Vec<f64> = w.as_slice().to_vec();
            prob.smooth.value(&u)
        };
        for _ in 0..20 {
            let u: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut x = vec![0.0; 7];
            a.matvec_transpose(&u, &mut x);
            let dist_sq: f64 =
                x.iter().zip(&xstar).map(|(p, q)| (p - q) * (p - q)).sum();
            let gap = prob.smooth.value(&u) - inf_d;
            assert!(0.5 * dist_sq <= gap + 1e-9, "0.5*{dist_sq} > {gap}");
        }
    }
}
