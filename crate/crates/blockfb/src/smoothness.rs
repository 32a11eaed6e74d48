//! Partial-separability structure and the per-block smoothness parameters
//! `nu_i` certifying one of the three generalized descent conditions:
//!
//! - S1 (in expectation): `E[f(x + eps (.) v)] <= f(x) + E[<grad f(x), eps (.) v>]
//!   + 1/2 sum_i p_i nu_i ||v_i||^2`
//! - S2 (almost surely):  `f(x + eps (.) v) <= f(x) + <grad f(x), eps (.) v>
//!   + 1/2 sum_i nu_i eps_i ||v_i||^2`
//! - S3 (deterministic):  the same bound for every displacement `v`.
//!
//! S3 implies S2 implies S1, so a certificate for a stronger condition is
//! valid for the weaker ones with the same parameters.

use std::hash::{Hash, Hasher};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::block::BlockPartition;
use crate::error::{Error, Result};
use crate::problems::SmoothOracle;
use crate::sampling::{
    beta_by_enumeration, conservative_beta2, BetaConstants, SamplingScheme,
};

/// Index sets `I_k` and Lipschitz data describing `f = sum_k g_k(sum_i U_{k,i} x_i)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "StructureRepr", into = "StructureRepr")]
pub struct SeparabilityStructure {
    m: usize,
    index_sets: Vec<Vec<usize>>,
    eta: usize,
    block_lipschitz: Vec<f64>,
    group_lipschitz: Option<Vec<f64>>,
    /// `per_group_block_lipschitz[k][j]` is the constant for block
    /// `index_sets[k][j]` within group `k`.
    per_group_block_lipschitz: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize, Clone)]
struct StructureRepr {
    m: usize,
    index_sets: Vec<Vec<usize>>,
    block_lipschitz: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    group_lipschitz: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    per_group_block_lipschitz: Option<Vec<Vec<f64>>>,
}

impl TryFrom<StructureRepr> for SeparabilityStructure {
    type Error = Error;
    fn try_from(r: StructureRepr) -> Result<Self> {
        let mut s = SeparabilityStructure::new(r.m, r.index_sets, r.block_lipschitz)?;
        if let Some(g) = r.group_lipschitz {
            s = s.with_group_lipschitz(g)?;
        }
        if let Some(t) = r.per_group_block_lipschitz {
            s = s.with_per_group_block_lipschitz(t)?;
        }
        Ok(s)
    }
}

impl From<SeparabilityStructure> for StructureRepr {
    fn from(s: SeparabilityStructure) -> Self {
        StructureRepr {
            m: s.m,
            index_sets: s.index_sets,
            block_lipschitz: s.block_lipschitz,
            group_lipschitz: s.group_lipschitz,
            per_group_block_lipschitz: s.per_group_block_lipschitz,
        }
    }
}

impl SeparabilityStructure {
    /// `eta` is always recomputed from the index sets, never trusted from
    /// configuration.
    pub fn new(m: usize, index_sets: Vec<Vec<usize>>, block_lipschitz: Vec<f64>) -> Result<Self> {
        if block_lipschitz.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: block_lipschitz.len(),
                context: "block_lipschitz",
            });
        }
        let mut index_sets = index_sets;
        let mut covered = vec![false; m];
        for set in &mut index_sets {
            set.sort_unstable();
            set.dedup();
            for &i in set.iter() {
                if i >= m {
                    return Err(Error::InvalidStructure(format!(
                        "index {i} out of range for m={m}"
                    )));
                }
                covered[i] = true;
            }
        }
        if !covered.iter().any(|&c| c) {
            return Err(Error::InvalidStructure("the union of the index sets is empty".into()));
        }
        for (i, (&c, &l)) in covered.iter().zip(&block_lipschitz).enumerate() {
            if c && !(l > 0.0) {
                return Err(Error::InvalidStructure(format!(
                    "block {i} is coupled by some group but has L_{i} = {l} (must be > 0)"
                )));
            }
            if l < 0.0 || !l.is_finite() {
                return Err(Error::InvalidStructure(format!("L_{i} = {l} invalid")));
            }
        }
        let eta = index_sets.iter().map(Vec::len).max().unwrap_or(0);
        if eta == 0 {
            return Err(Error::InvalidStructure("all index sets are empty".into()));
        }
        Ok(Self {
            m,
            index_sets,
            eta,
            block_lipschitz,
            group_lipschitz: None,
            per_group_block_lipschitz: None,
        })
    }

    pub fn with_group_lipschitz(mut self, group: Vec<f64>) -> Result<Self> {
        if group.len() != self.index_sets.len() {
            return Err(Error::DimensionMismatch {
                expected: self.index_sets.len(),
                got: group.len(),
                context: "group_lipschitz",
            });
        }
        if group.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidStructure("group Lipschitz constants must be >= 0".into()));
        }
        self.group_lipschitz = Some(group);
        Ok(self)
    }

    pub fn with_per_group_block_lipschitz(mut self, table: Vec<Vec<f64>>) -> Result<Self> {
        if table.len() != self.index_sets.len() {
            return Err(Error::DimensionMismatch {
                expected: self.index_sets.len(),
                got: table.len(),
                context: "per_group_block_lipschitz groups",
            });
        }
        for (k, (row, set)) in table.iter().zip(&self.index_sets).enumerate() {
            if row.len() != set.len() {
                return Err(Error::InvalidStructure(format!(
                    "per-group table row {k} has {} entries for {} blocks",
                    row.len(),
                    set.len()
                )));
            }
            if row.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
                return Err(Error::InvalidStructure(format!("invalid entry in table row {k}")));
            }
        }
        self.per_group_block_lipschitz = Some(table);
        Ok(self)
    }

    pub fn num_blocks(&self) -> usize {
        self.m
    }

    pub fn num_groups(&self) -> usize {
        self.index_sets.len()
    }

    pub fn index_sets(&self) -> &[Vec<usize>] {
        &self.index_sets
    }

    /// Degree of coupling `eta = max_k |I_k|`.
    pub fn eta(&self) -> usize {
        self.eta
    }

    pub fn block_lipschitz(&self) -> &[f64] {
        &self.block_lipschitz
    }

    pub fn group_lipschitz(&self) -> Option<&[f64]> {
        self.group_lipschitz.as_deref()
    }

    pub fn per_group_block_lipschitz(&self) -> Option<&[Vec<f64>]> {
        self.per_group_block_lipschitz.as_deref()
    }

    pub fn is_covered(&self, i: usize) -> bool {
        self.index_sets.iter().any(|s| s.binary_search(&i).is_ok())
    }

    /// Stable content hash used in certificate provenance records.
    pub fn content_hash(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.m.hash(&mut h);
        for set in &self.index_sets {
            set.hash(&mut h);
        }
        for &l in &self.block_lipschitz {
            l.to_bits().hash(&mut h);
        }
        if let Some(g) = &self.group_lipschitz {
            for &l in g {
                l.to_bits().hash(&mut h);
            }
        }
        if let Some(t) = &self.per_group_block_lipschitz {
            for row in t {
                for &l in row {
                    l.to_bits().hash(&mut h);
                }
            }
        }
        h.finish()
    }
}

/// Which smoothness condition a certificate guarantees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    S1,
    S2,
    S3,
}

impl Condition {
    /// S3 => S2 => S1.
    pub fn implies(self, weaker: Condition) -> bool {
        matches!(
            (self, weaker),
            (Condition::S3, _) | (Condition::S2, Condition::S2 | Condition::S1) | (Condition::S1, Condition::S1)
        )
    }
}

/// Record of how a certificate was produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateProvenance {
    pub formula: String,
    pub beta1: Option<Vec<f64>>,
    pub beta2: Option<f64>,
    pub structure_hash: u64,
}

/// Per-block smoothness parameters together with the condition they certify.
///
/// Blocks untouched by every group may carry `nu_i = 0`; the stepsize rule
/// caps their stepsize instead of dividing by zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothnessCertificate {
    pub nu: Vec<f64>,
    pub condition: Condition,
    pub provenance: CertificateProvenance,
}

impl SmoothnessCertificate {
    fn validate(mut self, structure: &SeparabilityStructure) -> Result<Self> {
        if self.nu.len() != structure.num_blocks() {
            return Err(Error::DimensionMismatch {
                expected: structure.num_blocks(),
                got: self.nu.len(),
                context: "certificate nu",
            });
        }
        for (i, v) in self.nu.iter_mut().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::InvalidParameter(format!("nu[{i}] = {v} invalid")));
            }
            if *v == 0.0 {
                if structure.is_covered(i) {
                    return Err(Error::InvalidParameter(format!(
                        "nu[{i}] = 0 but block {i} is coupled by the structure"
                    )));
                }
                *v = 0.0; // normalize -0.0 (empty float sums) so 1/nu stays +inf
            }
        }
        Ok(self)
    }

    /// A custom certificate supplied directly by the caller.
    pub fn custom(nu: Vec<f64>, condition: Condition, structure: &SeparabilityStructure) -> Result<Self> {
        SmoothnessCertificate {
            nu,
            condition,
            provenance: CertificateProvenance {
                formula: "custom".into(),
                beta1: None,
                beta2: None,
                structure_hash: structure.content_hash(),
            },
        }
        .validate(structure)
    }
}

/// `nu_i = beta_{1,i} L_i` (expectation-level condition).
pub fn nu_s1(structure: &SeparabilityStructure, betas: &BetaConstants) -> Result<SmoothnessCertificate> {
    if betas.beta1.len() != structure.num_blocks() {
        return Err(Error::DimensionMismatch {
            expected: structure.num_blocks(),
            got: betas.beta1.len(),
            context: "beta1",
        });
    }
    let nu = structure
        .block_lipschitz()
        .iter()
        .zip(&betas.beta1)
        .map(|(&l, &b)| b * l)
        .collect();
    SmoothnessCertificate {
        nu,
        condition: Condition::S1,
        provenance: CertificateProvenance {
            formula: format!("beta1_i * L_i ({:?})", betas.method),
            beta1: Some(betas.beta1.clone()),
            beta2: Some(betas.beta2),
            structure_hash: structure.content_hash(),
        },
    }
    .validate(structure)
}

/// Per-group refinement for the tau-nice sampling:
/// `nu_i = sum_{k: i in I_k} (1 + (tau-1)(|I_k|-1)/(m-1)) L^(k)_i`.
pub fn nu_s1_refined(structure: &SeparabilityStructure, tau: usize) -> Result<SmoothnessCertificate> {
    let table = structure
        .per_group_block_lipschitz()
        .ok_or(Error::MissingData("per-group block Lipschitz table"))?;
    let m = structure.num_blocks();
    if tau == 0 || tau > m {
        return Err(Error::InvalidParameter(format!("tau = {tau} outside [1, m = {m}]")));
    }
    let mut nu = vec![0.0; m];
    for (k, set) in structure.index_sets().iter().enumerate() {
        let card = set.len();
        let factor = if tau == 1 || m == 1 {
            1.0
        } else {
            1.0 + ((tau - 1) * (card - 1)) as f64 / (m - 1) as f64
        };
        for (j, &i) in set.iter().enumerate() {
            nu[i] += factor * table[k][j];
        }
    }
    SmoothnessCertificate {
        nu,
        condition: Condition::S1,
        provenance: CertificateProvenance {
            formula: format!("sum_k (1 + (tau-1)(|I_k|-1)/(m-1)) L^(k)_i, tau={tau}"),
            beta1: None,
            beta2: None,
            structure_hash: structure.content_hash(),
        },
    }
    .validate(structure)
}

/// Almost-sure certificate: the elementwise minimum of all available
/// S2-valid formulas (enumerated `beta_2 L_i`, the conservative
/// `min(eta, tau_max) L_i`, and the per-group
/// `sum_k min(|I_k|, tau_max) L^(k)_i` when the table exists).
pub fn nu_s2(structure: &SeparabilityStructure, scheme: &SamplingScheme) -> Result<SmoothnessCertificate> {
    let m = structure.num_blocks();
    if scheme.num_blocks() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: scheme.num_blocks(),
            context: "nu_s2 scheme",
        });
    }
    let tau_max = scheme.tau_max();
    let (beta2, formula) = match beta_by_enumeration(scheme, structure) {
        Ok(b) => (b.beta2, "enumerated beta2 * L_i"),
        Err(Error::SupportTooLarge { .. }) => {
            (conservative_beta2(structure.eta(), tau_max), "min(eta, tau_max) * L_i")
        }
        Err(e) => return Err(e),
    };
    let mut nu: Vec<f64> =
        structure.block_lipschitz().iter().map(|&l| beta2 * l).collect();

    let mut formula = formula.to_string();
    if let Some(table) = structure.per_group_block_lipschitz() {
        let mut per_group = vec![0.0; m];
        for (k, set) in structure.index_sets().iter().enumerate() {
            let factor = set.len().min(tau_max) as f64;
            for (j, &i) in set.iter().enumerate() {
                per_group[i] += factor * table[k][j];
            }
        }
        for i in 0..m {
            // keep zero entries at zero only when uncovered; for covered
            // blocks both candidates are positive
            if structure.is_covered(i) {
                nu[i] = nu[i].min(per_group[i]);
            }
        }
        formula = format!("min({formula}, sum_k min(|I_k|, tau_max) L^(k)_i)");
    }

    SmoothnessCertificate {
        nu,
        condition: Condition::S2,
        provenance: CertificateProvenance {
            formula,
            beta1: None,
            beta2: Some(beta2),
            structure_hash: structure.content_hash(),
        },
    }
    .validate(structure)
}

/// Deterministic certificate from per-block operator norms
/// `nu_i = || sum_k L^(k) U_{k,i}^T U_{k,i} ||`, supplied by the caller
/// (the built-in least-squares problems compute them from matrix columns).
pub fn nu_s3(
    structure: &SeparabilityStructure,
    operator_column_norms: &[f64],
) -> Result<SmoothnessCertificate> {
    if operator_column_norms.len() != structure.num_blocks() {
        return Err(Error::DimensionMismatch {
            expected: structure.num_blocks(),
            got: operator_column_norms.len(),
            context: "nu_s3 norms",
        });
    }
    SmoothnessCertificate {
        nu: operator_column_norms.to_vec(),
        condition: Condition::S3,
        provenance: CertificateProvenance {
            formula: "||sum_k L^(k) U_{k,i}^T U_{k,i}||".into(),
            beta1: None,
            beta2: None,
            structure_hash: structure.content_hash(),
        },
    }
    .validate(structure)
}

/// Global Lipschitz constants of the gradient in the three metrics of
/// interest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalLipschitzBounds {
    /// Original metric: `max_k sum_{i in I_k} L_i`.
    pub identity: f64,
    /// `Gamma^{-1}` metric: `max_k sum_{i in I_k} gamma_i L_i`.
    pub gamma_inv: f64,
    /// `Lambda` metric (weights `L_i`): the coupling degree `eta`.
    pub lambda: f64,
}

pub fn global_lipschitz_bounds(
    structure: &SeparabilityStructure,
    gamma: &[f64],
) -> Result<GlobalLipschitzBounds> {
    if gamma.len() != structure.num_blocks() {
        return Err(Error::DimensionMismatch {
            expected: structure.num_blocks(),
            got: gamma.len(),
            context: "global_lipschitz_bounds gamma",
        });
    }
    let l = structure.block_lipschitz();
    let mut identity: f64 = 0.0;
    let mut gamma_inv: f64 = 0.0;
    for set in structure.index_sets() {
        identity = identity.max(set.iter().map(|&i| l[i]).sum());
        gamma_inv = gamma_inv.max(set.iter().map(|&i| gamma[i] * l[i]).sum());
    }
    Ok(GlobalLipschitzBounds { identity, gamma_inv, lambda: structure.eta() as f64 })
}

/// Result of a brute-force check of an ESO inequality.
#[derive(Debug, Clone, Copy)]
pub struct EsoReport {
    /// Minimum of RHS - LHS over all probes (and atoms, for the
    /// almost-sure variant).
    pub min_slack: f64,
    pub trials: usize,
    pub atoms: usize,
    pub valid: bool,
}

/// Accumulated-rounding budget for the brute-force ESO checks.
pub const ESO_SLACK_TOL: f64 = -1e-10;

fn random_probe<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 10.0 {
        let s = 10.0 / norm;
        v.iter_mut().for_each(|x| *x *= s);
    }
    v
}

/// Slack `RHS - LHS` of the expectation-level inequality at one `(x, v)`
/// pair, with the expectation taken exactly over the enumerated support.
pub fn eso_slack_s1(
    oracle: &dyn SmoothOracle,
    partition: &BlockPartition,
    scheme: &SamplingScheme,
    certificate: &SmoothnessCertificate,
    x: &[f64],
    v: &[f64],
) -> Result<f64> {
    let atoms = scheme.support_atoms()?;
    let m = partition.num_blocks();
    let p = scheme.marginals();
    let fx = oracle.value(x);
    let mut grad = vec![0.0; partition.total_dim()];
    oracle.gradient(x, &mut grad);

    // E[f(x + eps (.) v)] over the support
    let mut lhs = 0.0;
    let mut shifted = vec![0.0; partition.total_dim()];
    for (support, prob) in &atoms {
        shifted.copy_from_slice(x);
        for &i in support {
            for idx in partition.block_range(i) {
                shifted[idx] += v[idx];
            }
        }
        lhs += prob * oracle.value(&shifted);
    }

    let mut rhs = fx;
    for i in 0..m {
        let r = partition.block_range(i);
        let g_dot_v: f64 = grad[r.clone()].iter().zip(&v[r.clone()]).map(|(a, b)| a * b).sum();
        let v_sq: f64 = v[r].iter().map(|a| a * a).sum();
        rhs += p[i] * g_dot_v + 0.5 * p[i] * certificate.nu[i] * v_sq;
    }
    Ok(rhs - lhs)
}

/// Minimum slack of the almost-sure inequality over every support atom at one
/// `(x, v)` pair.
pub fn eso_slack_s2(
    oracle: &dyn SmoothOracle,
    partition: &BlockPartition,
    scheme: &SamplingScheme,
    certificate: &SmoothnessCertificate,
    x: &[f64],
    v: &[f64],
) -> Result<f64> {
    let atoms = scheme.support_atoms()?;
    let fx = oracle.value(x);
    let mut grad = vec![0.0; partition.total_dim()];
    oracle.gradient(x, &mut grad);
    let mut min_slack = f64::INFINITY;
    let mut shifted = vec![0.0; partition.total_dim()];
    for (support, _) in &atoms {
        shifted.copy_from_slice(x);
        let mut rhs = fx;
        for &i in support {
            let r = partition.block_range(i);
            let mut g_dot_v = 0.0;
            let mut v_sq = 0.0;
            for idx in r {
                shifted[idx] += v[idx];
                g_dot_v += grad[idx] * v[idx];
                v_sq += v[idx] * v[idx];
            }
            rhs += g_dot_v + 0.5 * certificate.nu[i] * v_sq;
        }
        min_slack = min_slack.min(rhs - oracle.value(&shifted));
    }
    Ok(min_slack)
}

/// Verify the expectation-level inequality exactly over the enumerated
/// support for `trials` random `(x, v)` pairs.
pub fn verify_eso_s1<R: Rng + ?Sized>(
    oracle: &dyn SmoothOracle,
    partition: &BlockPartition,
    scheme: &SamplingScheme,
    certificate: &SmoothnessCertificate,
    trials: usize,
    rng: &mut R,
) -> Result<EsoReport> {
    let n = partition.total_dim();
    let atoms = scheme.support_atoms()?.len();
    let mut min_slack = f64::INFINITY;
    for _ in 0..trials {
        let x = random_probe(n, rng);
        let v = random_probe(n, rng);
        min_slack = min_slack.min(eso_slack_s1(oracle, partition, scheme, certificate, &x, &v)?);
    }
    Ok(EsoReport { min_slack, trials, atoms, valid: min_slack >= ESO_SLACK_TOL })
}

/// Verify the almost-sure inequality atom by atom.
pub fn verify_eso_s2<R: Rng + ?Sized>(
    oracle: &dyn SmoothOracle,
    partition: &BlockPartition,
    scheme: &SamplingScheme,
    certificate: &SmoothnessCertificate,
    trials: usize,
    rng: &mut R,
) -> Result<EsoReport> {
    let n = partition.total_dim();
    let atoms = scheme.support_atoms()?.len();
    let mut min_slack = f64::INFINITY;
    for _ in 0..trials {
        let x = random_probe(n, rng);
        let v = random_probe(n, rng);
        min_slack = min_slack.min(eso_slack_s2(oracle, partition, scheme, certificate, &x, &v)?);
    }
    Ok(EsoReport { min_slack, trials, atoms, valid: min_slack >= ESO_SLACK_TOL })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_lasso;
    use crate::sampling::beta_closed_form_tau_nice;
    use crate::sparse::CscMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag_lasso(diag: &[f64]) -> crate::problems::CompositeProblem {
        // f(x) = 1/2 sum d_i^2 x_i^2, fully separable least squares
        let trip: Vec<(usize, usize, f64)> =
            diag.iter().enumerate().map(|(i, &d)| (i, i, d)).collect();
        let a = CscMatrix::from_triplets(diag.len(), diag.len(), &trip).unwrap();
        make_lasso(a, vec![0.0; diag.len()], 0.0).unwrap()
    }

    fn sparse_lasso(m: usize, p: usize, seed: u64) -> crate::problems::CompositeProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trip = Vec::new();
        for r in 0..p {
            let mut idx: Vec<usize> = (0..m).collect();
            for j in 0..3 {
                let k = j + rng.random_range(0..m - j);
                idx.swap(j, k);
                trip.push((r, idx[j], rng.random_range(-1.0..1.0)));
            }
        }
        let a = CscMatrix::from_triplets(p, m, &trip).unwrap();
        let b: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        make_lasso(a, b, 0.0).unwrap()
    }

    #[test]
    fn structure_validation_and_serde() {
        assert!(SeparabilityStructure::new(2, vec![], vec![1.0, 1.0]).is_err());
        assert!(SeparabilityStructure::new(2, vec![vec![0, 5]], vec![1.0, 1.0]).is_err());
        // covered block with zero Lipschitz constant
        assert!(SeparabilityStructure::new(2, vec![vec![0]], vec![0.0, 1.0]).is_err());
        // uncovered block may have L = 0
        let st = SeparabilityStructure::new(2, vec![vec![0]], vec![2.0, 0.0]).unwrap();
        assert_eq!(st.eta(), 1);
        assert!(st.is_covered(0));
        assert!(!st.is_covered(1));

        let st = SeparabilityStructure::new(3, vec![vec![0, 2], vec![1]], vec![1.0, 2.0, 3.0])
            .unwrap()
            .with_group_lipschitz(vec![4.0, 5.0])
            .unwrap();
        let json = serde_json::to_string(&st).unwrap();
        let back: SeparabilityStructure = serde_json::from_str(&json).unwrap();
        assert_eq!(back.index_sets(), st.index_sets());
        assert_eq!(back.eta(), 2);
        assert_eq!(back.block_lipschitz(), st.block_lipschitz());
        assert_eq!(back.group_lipschitz(), st.group_lipschitz());
        // eta is ignored on input: absent from the representation entirely
        assert!(!json.contains("eta"));
    }

    #[test]
    fn condition_implication_chain() {
        assert!(Condition::S3.implies(Condition::S2));
        assert!(Condition::S3.implies(Condition::S1));
        assert!(Condition::S2.implies(Condition::S1));
        assert!(!Condition::S1.implies(Condition::S2));
        assert!(!Condition::S2.implies(Condition::S3));
    }

    #[test]
    fn nu_s1_examples() {
        let st = SeparabilityStructure::new(
            5,
            vec![vec![0, 1, 2], vec![2, 3, 4]],
            vec![2.0; 5],
        )
        .unwrap();
        // serial: beta1 = 1 -> nu = L
        let serial = SamplingScheme::serial_uniform(5).unwrap();
        let betas = beta_by_enumeration(&serial, &st).unwrap();
        let cert = nu_s1(&st, &betas).unwrap();
        assert!(cert.nu.iter().all(|&v| (v - 2.0).abs() < 1e-12));

        // fully parallel: nu = eta L
        let fp = SamplingScheme::fully_parallel(5).unwrap();
        let betas = beta_by_enumeration(&fp, &st).unwrap();
        let cert = nu_s1(&st, &betas).unwrap();
        // every block sits in a group of cardinality eta = 3 here
        assert!(cert.nu.iter().all(|&v| (v - 6.0).abs() < 1e-12));

        // m=5, eta=3, tau=2, L=2 -> nu = 1.5 * 2 = 3
        let nice = SamplingScheme::tau_nice(5, 2).unwrap();
        let betas = beta_by_enumeration(&nice, &st).unwrap();
        let cert = nu_s1(&st, &betas).unwrap();
        assert!(cert.nu.iter().all(|&v| (v - 3.0).abs() < 1e-12));
        assert_eq!(cert.condition, Condition::S1);
    }

    #[test]
    fn nu_s1_refined_examples() {
        // single group containing each block: reduces to the closed form
        let st = SeparabilityStructure::new(4, vec![vec![0, 1], vec![2, 3]], vec![3.0; 4])
            .unwrap()
            .with_per_group_block_lipschitz(vec![vec![3.0, 3.0], vec![3.0, 3.0]])
            .unwrap();
        let tau = 3;
        let cert = nu_s1_refined(&st, tau).unwrap();
        let beta = crate::sampling::beta_tau_nice(4, 2, tau).unwrap();
        assert!(cert.nu.iter().all(|&v| (v - beta * 3.0).abs() < 1e-12));

        // tau = 1: nu_i = sum_k L^(k)_i = L_i
        let cert = nu_s1_refined(&st, 1).unwrap();
        assert!(cert.nu.iter().all(|&v| (v - 3.0).abs() < 1e-12));

        // missing table
        let bare = SeparabilityStructure::new(2, vec![vec![0, 1]], vec![1.0, 1.0]).unwrap();
        assert!(matches!(nu_s1_refined(&bare, 1), Err(Error::MissingData(_))));
    }

    #[test]
    fn nu_s1_refined_matches_lasso_columns() {
        // nu_i = sum_{k in spt(a^i)} (1 + (tau-1)(|spt(a_k)|-1)/(m-1)) (a_k^i)^2
        let prob = sparse_lasso(6, 5, 7);
        let tau = 2;
        let cert = nu_s1_refined(&prob.structure, tau).unwrap();
        let st = &prob.structure;
        let m = st.num_blocks();
        let table = st.per_group_block_lipschitz().unwrap();
        for i in 0..m {
            let mut expect = 0.0;
            for (k, set) in st.index_sets().iter().enumerate() {
                if let Ok(j) = set.binary_search(&i) {
                    let card = set.len();
                    expect +=
                        (1.0 + ((tau - 1) * (card - 1)) as f64 / (m - 1) as f64) * table[k][j];
                }
            }
            assert!((cert.nu[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn nu_s2_examples() {
        let st = SeparabilityStructure::new(
            5,
            vec![vec![0, 1, 2], vec![2, 3, 4]],
            vec![1.0; 5],
        )
        .unwrap();
        // serial: nu = L
        let serial = SamplingScheme::serial_uniform(5).unwrap();
        let cert = nu_s2(&st, &serial).unwrap();
        assert!(cert.nu.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert_eq!(cert.condition, Condition::S2);

        // fully parallel: nu = eta L
        let fp = SamplingScheme::fully_parallel(5).unwrap();
        let cert = nu_s2(&st, &fp).unwrap();
        assert!(cert.nu.iter().all(|&v| (v - 3.0).abs() < 1e-12));

        // tau_max = 2, eta = 3 -> nu = 2 (enumerated beta2 equals the cap here)
        let nice = SamplingScheme::tau_nice(5, 2).unwrap();
        let cert = nu_s2(&st, &nice).unwrap();
        assert!(cert.nu.iter().all(|&v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn certificate_ordering_s1_le_s2_le_s3() {
        // The chain beta1_i <= beta2 <= min(eta, tau_max) orders the
        // L_i-proportional certificates on any instance; the elementwise
        // comparison against the S3 operator norms additionally needs
        // row entries of homogeneous magnitude (sign-pattern matrices),
        // since a row's norm can otherwise be dominated by one column.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut trip = Vec::new();
        for r in 0..6 {
            let mut idx: Vec<usize> = (0..8).collect();
            for j in 0..3 {
                let k = j + rng.random_range(0..8 - j);
                idx.swap(j, k);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                trip.push((r, idx[j], sign));
            }
        }
        let a = CscMatrix::from_triplets(6, 8, &trip).unwrap();
        let prob = make_lasso(a, vec![0.0; 6], 0.0).unwrap();
        let st = &prob.structure;
        let scheme = SamplingScheme::tau_nice(8, 3).unwrap();
        let betas = beta_by_enumeration(&scheme, st).unwrap();
        let s1 = nu_s1(st, &betas).unwrap();
        let s2 = nu_s2(st, &scheme).unwrap();
        let s3 = nu_s3(st, prob.s3_column_norms.as_ref().unwrap()).unwrap();
        let cap = conservative_beta2(st.eta(), scheme.tau_max());
        for i in 0..st.num_blocks() {
            let l = st.block_lipschitz()[i];
            assert!(s1.nu[i] <= betas.beta2 * l + 1e-12, "block {i}: S1 vs beta2 L");
            assert!(s2.nu[i] <= cap * l + 1e-12, "block {i}: S2 vs conservative");
            assert!(s1.nu[i] <= s2.nu[i] + 1e-12, "block {i}: S1 vs S2");
            assert!(s2.nu[i] <= s3.nu[i] + 1e-12, "block {i}: S2 vs S3");
        }
    }

    use crate::sampling::conservative_beta2;

    #[test]
    fn scaling_lipschitz_scales_nu() {
        let st = SeparabilityStructure::new(3, vec![vec![0, 1], vec![1, 2]], vec![1.0, 2.0, 0.5])
            .unwrap();
        let scheme = SamplingScheme::tau_nice(3, 2).unwrap();
        let betas = beta_by_enumeration(&scheme, &st).unwrap();
        let base = nu_s1(&st, &betas).unwrap();
        let c = 3.5;
        let scaled_st = SeparabilityStructure::new(
            3,
            st.index_sets().to_vec(),
            st.block_lipschitz().iter().map(|&l| c * l).collect(),
        )
        .unwrap();
        let scaled = nu_s1(&scaled_st, &betas).unwrap();
        for (a, b) in base.nu.iter().zip(&scaled.nu) {
            assert!((c * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn global_lipschitz_examples() {
        // eta = m, all L = 1, gamma = 1 -> identity constant m
        let m = 4;
        let st =
            SeparabilityStructure::new(m, vec![(0..m).collect()], vec![1.0; m]).unwrap();
        let b = global_lipschitz_bounds(&st, &vec![1.0; m]).unwrap();
        assert_eq!(b.identity, m as f64);
        assert_eq!(b.lambda, m as f64);

        // gamma_i = 1/L_i -> gamma_inv constant = eta = lambda constant
        let st2 = SeparabilityStructure::new(
            4,
            vec![vec![0, 1], vec![1, 2, 3]],
            vec![1.0, 4.0, 2.0, 0.5],
        )
        .unwrap();
        let gammas: Vec<f64> = st2.block_lipschitz().iter().map(|&l| 1.0 / l).collect();
        let b2 = global_lipschitz_bounds(&st2, &gammas).unwrap();
        assert_eq!(b2.gamma_inv, st2.eta() as f64);
        assert_eq!(b2.lambda, st2.eta() as f64);
    }

    #[test]
    fn rank_one_identity_bound_is_tight() {
        // rank-one A with equal column norms: the global Lipschitz constant
        // ||A||^2 equals sum_i L_i exactly
        let m = 5;
        let col = vec![0.5, -1.0, 2.0];
        let mut trip = Vec::new();
        for (r, &v) in col.iter().enumerate() {
            for c in 0..m {
                trip.push((r, c, v));
            }
        }
        let a = CscMatrix::from_triplets(3, m, &trip).unwrap();
        let prob = make_lasso(a, vec![0.0; 3], 0.0).unwrap();
        let b = global_lipschitz_bounds(&prob.structure, &vec![1.0; m]).unwrap();
        let sum_l: f64 = prob.structure.block_lipschitz().iter().sum();
        // spectral norm of a rank-one matrix is its Frobenius norm
        let frob_sq: f64 = col.iter().map(|v| v * v).sum::<f64>() * m as f64;
        assert!((b.identity - sum_l).abs() < 1e-12);
        assert!((frob_sq - sum_l).abs() < 1e-12);
    }

    #[test]
    fn eso_slack_zero_at_zero_displacement() {
        let prob = sparse_lasso(6, 8, 13);
        let scheme = SamplingScheme::tau_nice(6, 2).unwrap();
        let betas = beta_by_enumeration(&scheme, &prob.structure).unwrap();
        let cert = nu_s1(&prob.structure, &betas).unwrap();
        let x = vec![0.7; 6];
        let v = vec![0.0; 6];
        let s1 = eso_slack_s1(prob.smooth.as_ref(), &prob.partition, &scheme, &cert, &x, &v)
            .unwrap();
        assert_eq!(s1, 0.0);
        let s2 = eso_slack_s2(prob.smooth.as_ref(), &prob.partition, &scheme, &cert, &x, &v)
            .unwrap();
        assert_eq!(s2, 0.0);
    }

    #[test]
    fn eso_tight_for_separable_quadratic() {
        // fully separable f with nu_i = L_i: the quadratic expansion is exact,
        // so the slack vanishes for every (x, v)
        let prob = diag_lasso(&[1.0, 2.0, 0.5, 3.0]);
        let scheme = SamplingScheme::tau_nice(4, 2).unwrap();
        let betas = beta_by_enumeration(&scheme, &prob.structure).unwrap();
        // eta = 1 -> beta1 = 1 -> nu = L
        let cert = nu_s1(&prob.structure, &betas).unwrap();
        assert_eq!(cert.nu, prob.structure.block_lipschitz());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut report =
            verify_eso_s1(prob.smooth.as_ref(), &prob.partition, &scheme, &cert, 50, &mut rng)
                .unwrap();
        assert!(report.min_slack.abs() < 1e-10, "slack {}", report.min_slack);
        assert!(report.valid);

        // serial scheme, per-block quadratic: S2 slack vanishes too
        let serial = SamplingScheme::serial_uniform(4).unwrap();
        report =
            verify_eso_s2(prob.smooth.as_ref(), &prob.partition, &serial, &cert, 50, &mut rng)
                .unwrap();
        assert!(report.min_slack.abs() < 1e-10, "slack {}", report.min_slack);
    }

    #[test]
    fn eso_holds_on_random_sparse_least_squares() {
        for seed in 0..5 {
            let prob = sparse_lasso(6, 8, 100 + seed);
            let scheme = SamplingScheme::tau_nice(6, 2).unwrap();
            let betas = beta_by_enumeration(&scheme, &prob.structure).unwrap();
            let s1_cert = nu_s1(&prob.structure, &betas).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
            let report = verify_eso_s1(
                prob.smooth.as_ref(),
                &prob.partition,
                &scheme,
                &s1_cert,
                100,
                &mut rng,
            )
            .unwrap();
            assert!(report.valid, "S1 min_slack = {}", report.min_slack);

            // fully parallel with nu = eta L: almost-sure bound holds
            let fp = SamplingScheme::fully_parallel(6).unwrap();
            let s2_cert = nu_s2(&prob.structure, &fp).unwrap();
            let report = verify_eso_s2(
                prob.smooth.as_ref(),
                &prob.partition,
                &fp,
                &s2_cert,
                100,
                &mut rng,
            )
            .unwrap();
            assert!(report.valid, "S2 min_slack = {}", report.min_slack);
        }
    }

    #[test]
    fn s2_certificate_passes_s1_check() {
        // an almost-sure bound implies the expectation bound on the same instance
        let prob = sparse_lasso(6, 8, 55);
        let scheme = SamplingScheme::tau_nice(6, 3).unwrap();
        let cert = nu_s2(&prob.structure, &scheme).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let s2 = verify_eso_s2(prob.smooth.as_ref(), &prob.partition, &scheme, &cert, 40, &mut rng)
            .unwrap();
        let s1 = verify_eso_s1(prob.smooth.as_ref(), &prob.partition, &scheme, &cert, 40, &mut rng)
            .unwrap();
        assert!(s2.valid);
        assert!(s1.valid);
    }

    #[test]
    fn closed_form_constants_accepted() {
        let betas = beta_closed_form_tau_nice(6, 3, 2, 2).unwrap();
        let st = SeparabilityStructure::new(
            6,
            vec![vec![0, 1, 2], vec![3, 4, 5]],
            vec![1.0; 6],
        )
        .unwrap();
        let cert = nu_s1(&st, &betas).unwrap();
        assert!(cert.nu.iter().all(|&v| (v - betas.beta1[0]).abs() < 1e-12));
    }
}
