//! SVM hinge-loss dual:
//! `min_u 1/2 u^T K u - y^T u + indicator(y_i u_i in [0, 1/(lambda m)])`.
//!
//! A parallel random block-coordinate projected gradient method: the prox is
//! the projection onto `[0, 1/(lambda m)]` for positive labels and
//! `[-1/(lambda m), 0]` for negative ones.

use std::sync::Arc;

use crate::block::BlockPartition;
use crate::error::{Error, Result};
use crate::problems::quadratic::QuadraticDualOracle;
use crate::problems::{BoxProx, CompositeProblem, IndicatorInterval, StrongConvexity};
use crate::smoothness::SeparabilityStructure;
use crate::sparse::DenseMatrix;

pub fn make_svm_dual(k: DenseMatrix, y: Vec<f64>, lambda: f64) -> Result<CompositeProblem> {
    let m = k.nrows();
    if !k.is_symmetric(1e-10) {
        return Err(Error::InvalidProblem("Gram matrix must be symmetric".into()));
    }
    if y.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: y.len(), context: "svm labels" });
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must be > 0")));
    }
    for (i, &label) in y.iter().enumerate() {
        if label != 1.0 && label != -1.0 {
            return Err(Error::InvalidProblem(format!("label {i} is {label}, expected -1 or +1")));
        }
    }
    let block_l: Vec<f64> = (0..m).map(|i| k.get(i, i)).collect();
    for (i, &l) in block_l.iter().enumerate() {
        if !(l > 0.0) {
            return Err(Error::InvalidProblem(format!(
                "K[{i},{i}] = {l}; zero-norm samples cannot be updated"
            )));
        }
    }
    let bound = 1.0 / (lambda * m as f64);
    let intervals = y
        .iter()
        .map(|&label| {
            if label > 0.0 {
                IndicatorInterval { lower: 0.0, upper: bound }
            } else {
                IndicatorInterval { lower: -bound, upper: 0.0 }
            }
        })
        .collect();

    let structure = SeparabilityStructure::new(m, vec![(0..m).collect()], block_l)?;
    Ok(CompositeProblem {
        smooth: Arc::new(QuadraticDualOracle {
            k: Arc::new(k),
            y: Arc::new(y),
            ridge_term: 0.0,
            features: None,
        }),
        prox: Arc::new(BoxProx::new(intervals)?),
        partition: Arc::new(BlockPartition::scalar(m)?),
        structure,
        s3_column_norms: None,
        strong_convexity: StrongConvexity::default(),
        f_star: None,
        reference_solution: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::SeparableProx;

    fn identity(m: usize) -> DenseMatrix {
        let mut k = DenseMatrix::zeros(m, m);
        for i in 0..m {
            k.set(i, i, 1.0);
        }
        k
    }

    #[test]
    fn prox_projects_onto_label_interval() {
        // lambda m = 2 -> bound 0.5
        let prob = make_svm_dual(identity(2), vec![1.0, -1.0], 1.0).unwrap();
        let mut out = [0.0];

        // feasible endpoint: 0 stays 0
        prob.prox.prox_block(0, &[0.0], 0.7, &mut out).unwrap();
        assert_eq!(out[0], 0.0);

        // positive label, z = 5 clips to 0.5
        prob.prox.prox_block(0, &[5.0], 0.7, &mut out).unwrap();
        assert_eq!(out[0], 0.5);

        // negative label mirrors the interval
        prob.prox.prox_block(1, &[5.0], 0.7, &mut out).unwrap();
        assert_eq!(out[0], 0.0);
        prob.prox.prox_block(1, &[-5.0], 0.7, &mut out).unwrap();
        assert_eq!(out[0], -0.5);
    }

    #[test]
    fn invalid_labels_rejected() {
        assert!(make_svm_dual(identity(2), vec![1.0, 0.5], 1.0).is_err());
        assert!(make_svm_dual(identity(2), vec![1.0, -1.0], 0.0).is_err());
    }

    #[test]
    fn analytic_minimizer_is_a_fixed_point() {
        // K = I, lambda m = 1: D(u) = 1/2||u||^2 - y^T u over the boxes, so
        // u*_i = clamp(y_i) hits the interval endpoints y_i / |lambda m| = y_i.
        let prob = make_svm_dual(identity(2), vec![1.0, -1.0], 0.5).unwrap();
        let ustar = [1.0, -1.0];
        let mut grad = vec![0.0; 2];
        prob.smooth.gradient(&ustar, &mut grad);
        for i in 0..2 {
            let gamma = 0.8;
            let z = [ustar[i] - gamma * grad[i]];
            let mut out = [0.0];
            prob.prox.prox_block(i, &z, gamma, &mut out).unwrap();
            assert!((out[0] - ustar[i]).abs() < 1e-12);
        }
        // objective at the fixed point beats nearby feasible points
        let f = prob.objective(&ustar);
        assert!(f <= prob.objective(&[0.9, -1.0]) + 1e-12);
        assert!(f <= prob.objective(&[1.0, -0.9]) + 1e-12);
    }

    #[test]
    fn block_lipschitz_is_diagonal_of_gram() {
        let mut k = identity(3);
        k.set(1, 1, 4.0);
        let prob = make_svm_dual(k, vec![1.0, 1.0, -1.0], 0.2).unwrap();
        assert_eq!(prob.structure.block_lipschitz(), &[1.0, 4.0, 1.0]);
        assert_eq!(prob.structure.eta(), 3);
    }
}
