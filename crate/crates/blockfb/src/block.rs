//! Block structure of the variable space and the diagonal metrics used by the
//! analysis: a flat `f64` vector split into `m` blocks, together with weighted
//! inner products of the form `<x, y>_W = sum_i w_i <x_i, y_i>`.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Partition of a flat vector of dimension `N = sum(dims)` into `m` contiguous
/// blocks. Block `i` occupies `offsets[i] .. offsets[i] + dims[i]`.
///
/// Non-contiguous block definitions are normalized at construction time; the
/// permutation from normalized positions back to the caller's original flat
/// indices is recorded in the partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
    /// `permutation[new_pos] = original_pos`, present only when the partition
    /// was built from scattered index groups.
    permutation: Option<Vec<usize>>,
}

impl BlockPartition {
    /// Partition into contiguous blocks with the given per-block dimensions.
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidPartition("need at least one block".into()));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidPartition("block dimensions must be positive".into()));
        }
        let mut offsets = Vec::with_capacity(dims.len());
        let mut acc = 0usize;
        for &d in &dims {
            offsets.push(acc);
            acc += d;
        }
        Ok(Self { dims, offsets, total: acc, permutation: None })
    }

    /// `m` scalar blocks (dimension 1 each), the layout used by all built-in
    /// problems.
    pub fn scalar(m: usize) -> Result<Self> {
        Self::new(vec![1; m])
    }

    /// Build from explicit index groups over a flat vector of length `n`.
    /// The groups must form a partition of `0..n`. Indices inside a group need
    /// not be contiguous; they are relocated to contiguous ranges and the
    /// permutation is recorded.
    pub fn from_index_groups(groups: &[Vec<usize>], n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        let mut permutation = Vec::with_capacity(n);
        let mut dims = Vec::with_capacity(groups.len());
        for group in groups {
            if group.is_empty() {
                return Err(Error::InvalidPartition("empty index group".into()));
            }
            for &idx in group {
                if idx >= n {
                    return Err(Error::InvalidPartition(format!(
                        "index {idx} out of range for dimension {n}"
                    )));
                }
                if seen[idx] {
                    return Err(Error::InvalidPartition(format!("index {idx} appears twice")));
                }
                seen[idx] = true;
                permutation.push(idx);
            }
            dims.push(group.len());
        }
        if permutation.len() != n {
            return Err(Error::InvalidPartition(format!(
                "groups cover {} of {} indices",
                permutation.len(),
                n
            )));
        }
        let contiguous = permutation.iter().enumerate().all(|(k, &v)| k == v);
        let mut part = Self::new(dims)?;
        if !contiguous {
            part.permutation = Some(permutation);
        }
        Ok(part)
    }

    pub fn num_blocks(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.total
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn block_range(&self, i: usize) -> Range<usize> {
        let start = self.offsets[i];
        start..start + self.dims[i]
    }

    /// Permutation from normalized flat positions to original indices, if the
    /// partition was built from scattered groups.
    pub fn permutation(&self) -> Option<&[usize]> {
        self.permutation.as_deref()
    }

    /// Reorder a vector given in the caller's original index convention into
    /// the normalized contiguous layout.
    pub fn normalize(&self, original: &[f64]) -> Result<Vec<f64>> {
        check_len(original.len(), self.total, "normalize input")?;
        Ok(match &self.permutation {
            None => original.to_vec(),
            Some(perm) => perm.iter().map(|&src| original[src]).collect(),
        })
    }

    /// Inverse of [`normalize`](Self::normalize).
    pub fn denormalize(&self, normalized: &[f64]) -> Result<Vec<f64>> {
        check_len(normalized.len(), self.total, "denormalize input")?;
        Ok(match &self.permutation {
            None => normalized.to_vec(),
            Some(perm) => {
                let mut out = vec![0.0; self.total];
                for (pos, &src) in perm.iter().enumerate() {
                    out[src] = normalized[pos];
                }
                out
            }
        })
    }
}

fn check_len(got: usize, expected: usize, context: &'static str) -> Result<()> {
    if got != expected {
        return Err(Error::DimensionMismatch { expected, got, context });
    }
    Ok(())
}

/// A flat vector carrying its block partition.
#[derive(Debug, Clone)]
pub struct BlockVector {
    data: Vec<f64>,
    partition: Arc<BlockPartition>,
}

impl BlockVector {
    pub fn new(data: Vec<f64>, partition: Arc<BlockPartition>) -> Result<Self> {
        check_len(data.len(), partition.total_dim(), "BlockVector::new")?;
        Ok(Self { data, partition })
    }

    pub fn zeros(partition: Arc<BlockPartition>) -> Self {
        let n = partition.total_dim();
        Self { data: vec![0.0; n], partition }
    }

    pub fn partition(&self) -> &Arc<BlockPartition> {
        &self.partition
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[self.partition.block_range(i)]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let r = self.partition.block_range(i);
        &mut self.data[r]
    }

    /// Mutable views of pairwise-distinct blocks, enabling disjoint concurrent
    /// writes. Indices must be strictly increasing.
    pub fn disjoint_blocks_mut(&mut self, indices: &[usize]) -> Result<Vec<&mut [f64]>> {
        for w in indices.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidParameter(
                    "disjoint_blocks_mut requires strictly increasing block indices".into(),
                ));
            }
        }
        let mut views = Vec::with_capacity(indices.len());
        let mut rest: &mut [f64] = &mut self.data;
        let mut consumed = 0usize;
        for &i in indices {
            let r = self.partition.block_range(i);
            let (_, tail) = rest.split_at_mut(r.start - consumed);
            let (blk, tail) = tail.split_at_mut(r.len());
            views.push(blk);
            rest = tail;
            consumed = r.end;
        }
        Ok(views)
    }
}

/// Which weighted norm a [`DiagonalMetric`] represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    /// Weights `1/gamma_i` (stepsize metric).
    GammaInv,
    /// Weights `1/(gamma_i p_i)` (the metric of the sublinear bound).
    W,
    /// Weights `L_i` (block Lipschitz metric).
    Lambda,
    Identity,
}

/// Block-diagonal metric with one positive scalar weight per block, applied
/// uniformly within the block.
#[derive(Debug, Clone)]
pub struct DiagonalMetric {
    weights: Vec<f64>,
    kind: MetricKind,
}

impl DiagonalMetric {
    pub fn new(weights: Vec<f64>, kind: MetricKind) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("metric needs at least one weight".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("metric weights must be positive and finite".into()));
        }
        Ok(Self { weights, kind })
    }

    pub fn identity(m: usize) -> Self {
        Self { weights: vec![1.0; m], kind: MetricKind::Identity }
    }

    /// `1/gamma_i` weights from stepsizes.
    pub fn gamma_inv(gammas: &[f64]) -> Result<Self> {
        Self::new(gammas.iter().map(|&g| 1.0 / g).collect(), MetricKind::GammaInv)
    }

    /// `1/(gamma_i p_i)` weights from stepsizes and sampling marginals.
    pub fn w_metric(gammas: &[f64], marginals: &[f64]) -> Result<Self> {
        if gammas.len() != marginals.len() {
            return Err(Error::DimensionMismatch {
                expected: gammas.len(),
                got: marginals.len(),
                context: "w_metric marginals",
            });
        }
        let w = gammas.iter().zip(marginals).map(|(&g, &p)| 1.0 / (g * p)).collect();
        Self::new(w, MetricKind::W)
    }

    pub fn lambda(block_lipschitz: &[f64]) -> Result<Self> {
        Self::new(block_lipschitz.to_vec(), MetricKind::Lambda)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }
}

/// `||x||^2_M = sum_i w_i ||x_i||^2`.
pub fn weighted_norm_sq(x: &BlockVector, metric: &DiagonalMetric) -> Result<f64> {
    let m = x.partition().num_blocks();
    check_len(metric.weights().len(), m, "weighted_norm_sq metric")?;
    let mut acc = 0.0;
    for (i, &w) in metric.weights().iter().enumerate() {
        let block = x.block(i);
        let sq: f64 = block.iter().map(|v| v * v).sum();
        acc += w * sq;
    }
    Ok(acc)
}

/// Same norm on a raw slice sharing the partition's layout.
pub fn weighted_norm_sq_flat(
    x: &[f64],
    partition: &BlockPartition,
    weights: &[f64],
) -> Result<f64> {
    check_len(x.len(), partition.total_dim(), "weighted_norm_sq_flat data")?;
    check_len(weights.len(), partition.num_blocks(), "weighted_norm_sq_flat weights")?;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        let sq: f64 = x[partition.block_range(i)].iter().map(|v| v * v).sum();
        acc += w * sq;
    }
    Ok(acc)
}

/// `out_i = candidate_i` where `mask[i]`, else `x_i` — the masked iterate
/// update `x + eps (.) (candidate - x)`.
pub fn masked_update(x: &BlockVector, mask: &[bool], candidate: &BlockVector) -> Result<BlockVector> {
    if x.partition() != candidate.partition() {
        return Err(Error::PartitionMismatch { context: "masked_update candidate" });
    }
    let m = x.partition().num_blocks();
    check_len(mask.len(), m, "masked_update mask")?;
    let mut out = x.clone();
    for (i, &selected) in mask.iter().enumerate() {
        if selected {
            out.block_mut(i).copy_from_slice(candidate.block(i));
        }
    }
    Ok(out)
}
