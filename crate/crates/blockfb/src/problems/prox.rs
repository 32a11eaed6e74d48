//! Blockwise prox families used by the built-in problems.

use crate::error::{Error, Result};
use crate::problems::{soft_threshold, SeparableProx};

/// Feasibility slack for indicator proxes.
pub const INDICATOR_TOL: f64 = 1e-12;

/// `g = 0`: the prox is the identity.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroProx;

impl SeparableProx for ZeroProx {
    fn prox_block(&self, _i: usize, z: &[f64], _step: f64, out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(z);
        Ok(())
    }

    fn value_block(&self, _i: usize, _x: &[f64]) -> f64 {
        0.0
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// `h_i(x_i) = lambda ||x_i||_1`; prox is componentwise soft thresholding.
#[derive(Debug, Clone, Copy)]
pub struct L1Prox {
    pub lambda: f64,
}

impl L1Prox {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda = {lambda} must be >= 0")));
        }
        Ok(Self { lambda })
    }
}

impl SeparableProx for L1Prox {
    fn prox_block(&self, _i: usize, z: &[f64], step: f64, out: &mut [f64]) -> Result<()> {
        let kappa = step * self.lambda;
        for (o, &v) in out.iter_mut().zip(z) {
            *o = soft_threshold(v, kappa);
        }
        Ok(())
    }

    fn value_block(&self, _i: usize, x: &[f64]) -> f64 {
        self.lambda * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn is_zero(&self) -> bool {
        self.lambda == 0.0
    }
}

/// A closed interval per flat coordinate.
#[derive(Debug, Clone, Copy)]
pub struct IndicatorInterval {
    pub lower: f64,
    pub upper: f64,
}

/// Indicator of a per-coordinate box; the prox is the projection and the
/// value is `0` on the box (within [`INDICATOR_TOL`]) and `+inf` outside.
#[derive(Debug, Clone)]
pub struct BoxProx {
    intervals: Vec<IndicatorInterval>,
}

impl BoxProx {
    pub fn new(intervals: Vec<IndicatorInterval>) -> Result<Self> {
        for (i, iv) in intervals.iter().enumerate() {
            if !(iv.lower <= iv.upper) {
                return Err(Error::InvalidParameter(format!(
                    "interval {i} has lower {} > upper {}",
                    iv.lower, iv.upper
                )));
            }
        }
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> &[IndicatorInterval] {
        &self.intervals
    }
}

impl SeparableProx for BoxProx {
    fn prox_block(&self, i: usize, z: &[f64], _step: f64, out: &mut [f64]) -> Result<()> {
        // scalar blocks: flat index == block index
        let iv = &self.intervals[i];
        debug_assert_eq!(z.len(), 1);
        out[0] = z[0].clamp(iv.lower, iv.upper);
        Ok(())
    }

    fn value_block(&self, i: usize, x: &[f64]) -> f64 {
        let iv = &self.intervals[i];
        let span = 1.0 + (iv.upper - iv.lower).abs();
        if x[0] >= iv.lower - INDICATOR_TOL * span && x[0] <= iv.upper + INDICATOR_TOL * span {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn project_domain(&self, i: usize, z: &mut [f64]) -> bool {
        let iv = &self.intervals[i];
        let clamped = z[0].clamp(iv.lower, iv.upper);
        let changed = clamped != z[0];
        z[0] = clamped;
        changed
    }
}
