//! Ridge-regression dual: `min_u 1/2 u^T (K + lambda m I) u - y^T u`,
//! strongly convex with modulus `lambda m`, solution `(K + lambda m I)^{-1} y`.

use std::sync::Arc;

use crate::block::BlockPartition;
use crate::error::{Error, Result};
use crate::problems::quadratic::QuadraticDualOracle;
use crate::problems::{CompositeProblem, StrongConvexity, ZeroProx};
use crate::smoothness::SeparabilityStructure;
use crate::sparse::DenseMatrix;

/// Build the ridge dual from a PSD Gram matrix. Supplying the feature matrix
/// `X` (rows are samples, `K = X X^T`) lets the cache maintain the primal
/// weights `w = X^T u` and sharpens the separability structure through the
/// feature-column supports.
pub fn make_ridge_dual(
    k: DenseMatrix,
    y: Vec<f64>,
    lambda: f64,
    features: Option<DenseMatrix>,
) -> Result<CompositeProblem> {
    let m = k.nrows();
    if !k.is_symmetric(1e-10) {
        return Err(Error::InvalidProblem("Gram matrix must be symmetric".into()));
    }
    if y.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: y.len(), context: "ridge targets" });
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must be > 0")));
    }
    if let Some(x) = &features {
        if x.nrows() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: x.nrows(),
                context: "ridge feature rows",
            });
        }
    }
    let lambda_m = lambda * m as f64;
    let block_l: Vec<f64> = (0..m).map(|i| k.get(i, i) + lambda_m).collect();

    let (structure, s3) = match &features {
        Some(x) => {
            let (st, s3) = feature_structure(x, block_l.clone(), lambda_m)?;
            (st, Some(s3))
        }
        None => (SeparabilityStructure::new(m, vec![(0..m).collect()], block_l)?, None),
    };

    Ok(CompositeProblem {
        smooth: Arc::new(QuadraticDualOracle {
            k: Arc::new(k),
            y: Arc::new(y),
            ridge_term: lambda_m,
            features: features.map(Arc::new),
        }),
        prox: Arc::new(ZeroProx),
        partition: Arc::new(BlockPartition::scalar(m)?),
        structure,
        s3_column_norms: s3,
        strong_convexity: StrongConvexity { mu_smooth: lambda_m },
        f_star: None,
        reference_solution: None,
    })
}

/// Feature columns couple their sample supports; the `lambda m` term adds one
/// separable group per sample. Returns the structure and the deterministic
/// per-block constants `sum_{j: X_ij != 0} ||X^(j)||^2 + lambda m`.
fn feature_structure(
    x: &DenseMatrix,
    block_l: Vec<f64>,
    lambda_m: f64,
) -> Result<(SeparabilityStructure, Vec<f64>)> {
    let m = x.nrows();
    let d = x.ncols();
    let mut index_sets = Vec::new();
    let mut group_l = Vec::new();
    let mut table = Vec::new();
    let mut s3 = vec![lambda_m; m];
    for j in 0..d {
        let mut support = Vec::new();
        let mut entries = Vec::new();
        let mut col_norm = 0.0;
        for i in 0..m {
            let v = x.get(i, j);
            if v != 0.0 {
                support.push(i);
                entries.push(v * v);
                col_norm += v * v;
            }
        }
        if support.is_empty() {
            continue;
        }
        for &i in &support {
            s3[i] += col_norm;
        }
        index_sets.push(support);
        group_l.push(col_norm);
        table.push(entries);
    }
    for i in 0..m {
        index_sets.push(vec![i]);
        group_l.push(lambda_m);
        table.push(vec![lambda_m]);
    }
    let st = SeparabilityStructure::new(m, index_sets, block_l)?
        .with_group_lipschitz(group_l)?
        .with_per_group_block_lipschitz(table)?;
    Ok((st, s3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::finite_difference_gradient;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity(m: usize) -> DenseMatrix {
        let mut k = DenseMatrix::zeros(m, m);
        for i in 0..m {
            k.set(i, i, 1.0);
        }
        k
    }

    pub(crate) fn random_gram(m: usize, d: usize, rng: &mut ChaCha8Rng) -> (DenseMatrix, DenseMatrix) {
        let x = DenseMatrix::new(
            m,
            d,
            (0..m * d).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let k = x.gram();
        (k, x)
    }

    #[test]
    fn scalar_closed_form() {
        // K = I, m = 1, lambda = 1, y = 2: ubar = 2/(1 + 1) = 1
        let prob = make_ridge_dual(identity(1), vec![2.0], 1.0, None).unwrap();
        let mut grad = [0.0];
        prob.smooth.gradient(&[1.0], &mut grad);
        assert!(grad[0].abs() < 1e-15, "ubar = 1 should be stationary, grad = {}", grad[0]);
        assert_eq!(prob.strong_convexity.mu_smooth, 1.0);
        assert_eq!(prob.structure.block_lipschitz(), &[2.0]);
    }

    #[test]
    fn matches_direct_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let m = 60;
        let (k, _) = random_gram(m, 20, &mut rng);
        let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lambda = 0.05;
        let prob = make_ridge_dual(k.clone(), y.clone(), lambda, None).unwrap();

        let lambda_m = lambda * m as f64;
        let mut a = nalgebra::DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                a[(i, j)] = k.get(i, j) + if i == j { lambda_m } else { 0.0 };
            }
        }
        let ubar = a.lu().solve(&nalgebra::DVector::from_vec(y)).unwrap();

        // stationary point of the dual
        let mut grad = vec![0.0; m];
        prob.smooth.gradient(ubar.as_slice(), &mut grad);
        let gnorm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(gnorm < 1e-9, "gradient norm at direct solution: {gnorm}");
    }

    #[test]
    fn asymmetric_gram_rejected() {
        let mut k = identity(2);
        k.set(0, 1, 0.5);
        assert!(make_ridge_dual(k, vec![0.0, 0.0], 0.1, None).is_err());
    }

    #[test]
    fn gradient_and_primal_cache() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let m = 12;
        let (k, x) = random_gram(m, 5, &mut rng);
        let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let prob = make_ridge_dual(k, y, 0.2, Some(x.clone())).unwrap();

        let u: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut grad = vec![0.0; m];
        prob.smooth.gradient(&u, &mut grad);
        let fd = finite_difference_gradient(prob.smooth.as_ref(), &u, 1e-6);
        for (g, f) in grad.iter().zip(&fd) {
            assert!((g - f).abs() <= 1e-5 * (1.0 + g.abs()));
        }

        // primal weights track w = X^T u through deltas
        let mut u2 = u.clone();
        let mut cache = prob.smooth.init_cache(&u2).unwrap();
        for _ in 0..500 {
            let i = rng.random_range(0..m);
            let d: f64 = rng.random_range(-0.1..0.1);
            u2[i] += d;
            cache.apply_block_delta(i..i + 1, &[d]);
        }
        let w = cache.primal().unwrap().to_vec();
        let mut w_fresh = vec![0.0; 5];
        for i in 0..m {
            for (wj, &xij) in w_fresh.iter_mut().zip(x.row(i)) {
                *wj += u2[i] * xij;
            }
        }
        for (a, b) in w.iter().zip(&w_fresh) {
            assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }

        // structure tallies: per-block sums reproduce L_i = K_ii + lambda m
        let st = &prob.structure;
        let table = st.per_group_block_lipschitz().unwrap();
        let mut sums = vec![0.0; m];
        for (k_idx, set) in st.index_sets().iter().enumerate() {
            for (j, &i) in set.iter().enumerate() {
                sums[i] += table[k_idx][j];
            }
        }
        for (s, l) in sums.iter().zip(st.block_lipschitz()) {
            assert!((s - l).abs() < 1e-10 * (1.0 + l.abs()));
        }
    }
}
