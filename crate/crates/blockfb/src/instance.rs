//! Seeded random least-squares instance generation: a sparse design matrix
//! with a fixed number of nonzeros per row, a sparse ground truth, and
//! `b = A xbar + noise * alpha` with standard normal `alpha`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CscMatrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceSpec {
    /// Number of rows (equations / samples).
    pub p: usize,
    /// Number of columns (unknowns / blocks).
    pub m: usize,
    /// Nonzeros per row; the realized coupling degree is measured, not
    /// assumed.
    pub nnz_per_row: usize,
    /// Noise scale on the right-hand side.
    pub noise: f64,
    /// Nonzeros of the sparse ground truth.
    pub xbar_nnz: usize,
    pub seed: u64,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self { p: 100, m: 500, nnz_per_row: 5, noise: 0.06, xbar_nnz: 50, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub a: CscMatrix,
    pub b: Vec<f64>,
    pub xbar: Vec<f64>,
    /// Max row support: the coupling degree `eta` of the Lasso structure.
    pub eta_rows: usize,
    /// Max column support (the coupling degree of the dual structure).
    pub eta_cols: usize,
}

/// Entries are uniform in `[-1, 1]`; row supports are uniform `nnz_per_row`
/// subsets. Deterministic given the seed.
pub fn generate_least_squares(spec: &InstanceSpec) -> Result<GeneratedInstance> {
    if spec.p == 0 || spec.m == 0 {
        return Err(Error::InvalidParameter("instance needs p, m >= 1".into()));
    }
    if spec.nnz_per_row == 0 || spec.nnz_per_row > spec.m {
        return Err(Error::InvalidParameter(format!(
            "nnz_per_row = {} outside [1, m = {}]",
            spec.nnz_per_row, spec.m
        )));
    }
    if spec.xbar_nnz > spec.m {
        return Err(Error::InvalidParameter("xbar_nnz exceeds m".into()));
    }
    if !(spec.noise >= 0.0) {
        return Err(Error::InvalidParameter("noise must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut triplets = Vec::with_capacity(spec.p * spec.nnz_per_row);
    let mut idx: Vec<usize> = (0..spec.m).collect();
    for r in 0..spec.p {
        for j in 0..spec.nnz_per_row {
            let k = j + rng.random_range(0..spec.m - j);
            idx.swap(j, k);
            triplets.push((r, idx[j], rng.random_range(-1.0..1.0)));
        }
    }
    let a = CscMatrix::from_triplets(spec.p, spec.m, &triplets)?;

    let mut xbar = vec![0.0; spec.m];
    for j in 0..spec.xbar_nnz {
        let k = j + rng.random_range(0..spec.m - j);
        idx.swap(j, k);
        xbar[idx[j]] = rng.random_range(-1.0..1.0);
    }

    let mut b = vec![0.0; spec.p];
    a.matvec(&xbar, &mut b);
    for bi in b.iter_mut() {
        let alpha: f64 = StandardNormal.sample(&mut rng);
        *bi += spec.noise * alpha;
    }

    let csr = a.to_csr();
    let eta_rows = (0..spec.p).map(|k| csr.row_support(k).len()).max().unwrap_or(0);
    let eta_cols = (0..spec.m).map(|j| a.col(j).0.len()).max().unwrap_or(0);
    Ok(GeneratedInstance { a, b, xbar, eta_rows, eta_cols })
}
