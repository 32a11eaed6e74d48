//! Problem abstractions (smooth oracle plus separable prox) and the built-in
//! instantiations: Lasso, minimal-norm/Kaczmarz dual, ridge dual, and the SVM
//! hinge dual.

use std::ops::Range;
use std::sync::Arc;

use crate::block::BlockPartition;
use crate::error::{Error, Result};
use crate::smoothness::SeparabilityStructure;

mod lasso;
mod min_norm;
mod prox;
mod quadratic;
mod ridge;
mod svm;

pub use lasso::make_lasso;
pub use min_norm::make_min_norm_dual;
pub use prox::{BoxProx, IndicatorInterval, L1Prox, ZeroProx};
pub use ridge::make_ridge_dual;
pub use svm::make_svm_dual;

/// Convex differentiable smooth part `f`.
///
/// Implementations must keep `partial_gradient` blockwise-consistent with
/// `gradient`. Problems whose gradients admit cheap incremental updates
/// return a residual cache from `init_cache`; the solver then never calls the
/// direct gradient methods on the hot path.
pub trait SmoothOracle: Send + Sync {
    /// Flat dimension of the variable.
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Full gradient written into `out` (length `dim`).
    fn gradient(&self, x: &[f64], out: &mut [f64]);

    /// Gradient restricted to one block (`out.len() == block.len()`).
    fn partial_gradient(&self, x: &[f64], block: Range<usize>, out: &mut [f64]);

    /// Start the incremental-gradient protocol at `x`, if the problem
    /// supports one.
    fn init_cache(&self, x: &[f64]) -> Option<Box<dyn SmoothCache>>;
}

/// Incrementally maintained state making partial gradients cheap.
///
/// The cache reflects a definite iterate: after `apply_block_delta` for every
/// changed block it reflects the updated point. `snapshot`/`restore` support
/// the monotone safeguard's rollback without floating-point drift.
pub trait SmoothCache: Send + Sync {
    fn partial_gradient(&self, x: &[f64], block: Range<usize>, out: &mut [f64]);

    /// Commit `x_block += delta` into the cached quantities.
    fn apply_block_delta(&mut self, block: Range<usize>, delta: &[f64]);

    /// Smooth value at the point the cache currently reflects.
    fn value(&self, x: &[f64]) -> f64;

    /// Recompute everything from scratch (drift control).
    fn rebuild(&mut self, x: &[f64]);

    fn snapshot(&self) -> Vec<f64>;

    fn restore(&mut self, snapshot: &[f64]);

    /// The maintained auxiliary vector (for Lasso the residual `Ax - b`).
    fn residual(&self) -> &[f64];

    /// Mapped primal iterate, when the problem is a dual and maintains one.
    fn primal(&self) -> Option<&[f64]> {
        None
    }
}

/// Separable nonsmooth part `g(x) = sum_i h_i(x_i)` accessed through
/// blockwise prox evaluations.
pub trait SeparableProx: Send + Sync {
    /// `out = prox_{step * h_i}(z)`.
    fn prox_block(&self, i: usize, z: &[f64], step: f64, out: &mut [f64]) -> Result<()>;

    /// `h_i(x_i)`, possibly `+inf` for indicator functions.
    fn value_block(&self, i: usize, x: &[f64]) -> f64;

    /// Strong-convexity modulus of `g` in the original norm.
    fn modulus(&self) -> f64 {
        0.0
    }

    /// Project `z` onto `dom h_i` in place; returns true if `z` changed.
    /// Only indicator-type proxes restrict the domain.
    fn project_domain(&self, _i: usize, _z: &mut [f64]) -> bool {
        false
    }

    /// True when `g = 0` (prox is the identity).
    fn is_zero(&self) -> bool {
        false
    }
}

/// Strong-convexity metadata of the smooth part, in the original norm.
#[derive(Debug, Clone, Copy, Default)]
pub struct StrongConvexity {
    pub mu_smooth: f64,
}

/// A composite problem `min f(x) + sum_i h_i(x_i)` bundled with its block
/// partition and separability structure.
pub struct CompositeProblem {
    pub smooth: Arc<dyn SmoothOracle>,
    pub prox: Arc<dyn SeparableProx>,
    pub partition: Arc<BlockPartition>,
    pub structure: SeparabilityStructure,
    /// Operator norms for the deterministic (S3) certificate, when the
    /// problem can compute them from its data.
    pub s3_column_norms: Option<Vec<f64>>,
    pub strong_convexity: StrongConvexity,
    /// Known optimal value, when available.
    pub f_star: Option<f64>,
    /// Known (or high-accuracy) solution, when available.
    pub reference_solution: Option<Vec<f64>>,
}

impl CompositeProblem {
    pub fn dim(&self) -> usize {
        self.partition.total_dim()
    }

    pub fn num_blocks(&self) -> usize {
        self.partition.num_blocks()
    }

    /// `F(x) = f(x) + g(x)`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.smooth.value(x) + self.separable_value(x)
    }

    pub fn separable_value(&self, x: &[f64]) -> f64 {
        if self.prox.is_zero() {
            return 0.0;
        }
        (0..self.num_blocks())
            .map(|i| self.prox.value_block(i, &x[self.partition.block_range(i)]))
            .sum()
    }

    /// Deterministic certificate from the problem's own operator norms, when
    /// it can compute them.
    pub fn s3_certificate(&self) -> Result<crate::smoothness::SmoothnessCertificate> {
        let norms = self
            .s3_column_norms
            .as_ref()
            .ok_or(Error::MissingData("this problem does not expose S3 operator norms"))?;
        crate::smoothness::nu_s3(&self.structure, norms)
    }
}

/// `sign(t) max(0, |t| - kappa)`, with `sign(0) = 0`.
pub fn soft_threshold(t: f64, kappa: f64) -> f64 {
    debug_assert!(kappa >= 0.0);
    if t > kappa {
        t - kappa
    } else if t < -kappa {
        t + kappa
    } else {
        0.0
    }
}

/// Central finite-difference gradient, for verification against analytic
/// gradients (step `1e-6`, relative tolerance about `1e-5` on well-scaled
/// problems).
pub fn finite_difference_gradient(oracle: &dyn SmoothOracle, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for j in 0..x.len() {
        probe[j] = x[j] + step;
        let plus = oracle.value(&probe);
        probe[j] = x[j] - step;
        let minus = oracle.value(&probe);
        probe[j] = x[j];
        grad[j] = (plus - minus) / (2.0 * step);
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(0.0, 0.5), 0.0);
        assert_eq!(soft_threshold(1.2, 0.5), 0.7);
        assert_eq!(soft_threshold(-1.2, 0.5), -0.7);
        // dead zone
        assert_eq!(soft_threshold(0.5, 0.5), 0.0);
        assert_eq!(soft_threshold(-0.3, 0.5), 0.0);
        // kappa = 0 is the identity
        assert_eq!(soft_threshold(-2.5, 0.0), -2.5);
    }

    #[test]
    fn soft_threshold_is_odd() {
        for &t in &[0.0, 0.1, 0.5, 1.0, 3.7, 100.0] {
            for &k in &[0.0, 0.2, 1.0, 5.0] {
                assert_eq!(soft_threshold(-t, k), -soft_threshold(t, k));
            }
        }
    }
}
