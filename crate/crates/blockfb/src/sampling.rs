//! Random block samplings: the `{0,1}^m` selector drawn each iteration, its
//! exact marginals `p_i`, and the constants `beta_{1,i}`, `beta_2` that turn
//! block Lipschitz constants into smoothness parameters for a given sampling.
//!
//! `beta_{1,i}` is the conditional expectation
//! `E[max_k sum_{j in I_k} eps_j | eps_i = 1]` (expectation-level constant) and
//! `beta_2` the essential supremum of the inner max (almost-sure constant).
//! Both are computed exactly by enumerating the support when it is small, with
//! closed forms for the tau-nice and doubly-uniform families.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smoothness::SeparabilityStructure;

/// Atoms with probability below this are treated as null when taking
/// essential suprema over an enumerated support.
pub const NULL_ATOM_TOL: f64 = 1e-15;

/// Largest support we are willing to enumerate.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// One outcome of an explicit sampling: a nonempty block subset and its
/// probability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Atom {
    pub support: Vec<usize>,
    pub prob: f64,
}

#[derive(Debug, Clone)]
enum SchemeKind {
    /// Exactly one block, block `i` with probability `probs[i]`.
    SerialNonuniform { probs: Vec<f64>, cumulative: Vec<f64> },
    /// Uniform over all subsets of size `tau`.
    TauNice { tau: usize },
    /// The constant all-ones selector.
    FullyParallel,
    /// Arbitrary finite-support sampling.
    ExplicitAtoms { atoms: Vec<Atom>, cumulative: Vec<f64> },
}

/// A validated distribution over `{0,1}^m \ {0}` with derived marginals and
/// maximum parallelism. Immutable and freely shareable across workers.
#[derive(Debug, Clone)]
pub struct SamplingScheme {
    m: usize,
    kind: SchemeKind,
    marginals: Vec<f64>,
    tau_max: usize,
}

impl SamplingScheme {
    pub fn serial_uniform(m: usize) -> Result<Self> {
        Self::serial_nonuniform(vec![1.0 / m as f64; m])
    }

    pub fn serial_nonuniform(probs: Vec<f64>) -> Result<Self> {
        let m = probs.len();
        if m == 0 {
            return Err(Error::InvalidScheme("no blocks".into()));
        }
        if probs.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidScheme("serial probabilities must be positive".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidScheme(format!(
                "serial probabilities sum to {total}, expected 1"
            )));
        }
        let cumulative = cumsum(&probs);
        Ok(Self {
            m,
            marginals: probs.clone(),
            kind: SchemeKind::SerialNonuniform { probs, cumulative },
            tau_max: 1,
        })
    }

    pub fn tau_nice(m: usize, tau: usize) -> Result<Self> {
        if m == 0 || tau == 0 || tau > m {
            return Err(Error::InvalidScheme(format!("tau-nice needs 1 <= tau <= m, got tau={tau}, m={m}")));
        }
        Ok(Self {
            m,
            kind: SchemeKind::TauNice { tau },
            marginals: vec![tau as f64 / m as f64; m],
            tau_max: tau,
        })
    }

    pub fn fully_parallel(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidScheme("no blocks".into()));
        }
        Ok(Self { m, kind: SchemeKind::FullyParallel, marginals: vec![1.0; m], tau_max: m })
    }

    pub fn explicit(m: usize, atoms: Vec<Atom>) -> Result<Self> {
        if m == 0 || atoms.is_empty() {
            return Err(Error::InvalidScheme("need at least one block and one atom".into()));
        }
        let mut marginals = vec![0.0; m];
        let mut total = 0.0;
        let mut tau_max = 0usize;
        let mut atoms = atoms;
        for atom in &mut atoms {
            if atom.support.is_empty() {
                return Err(Error::InvalidScheme("atom with empty support (P(eps = 0) must be 0)".into()));
            }
            if !(atom.prob > 0.0) || !atom.prob.is_finite() {
                return Err(Error::InvalidScheme("atom probabilities must be positive".into()));
            }
            atom.support.sort_unstable();
            atom.support.dedup();
            if *atom.support.last().unwrap() >= m {
                return Err(Error::InvalidScheme(format!(
                    "atom support index {} out of range for m={m}",
                    atom.support.last().unwrap()
                )));
            }
            total += atom.prob;
            for &i in &atom.support {
                marginals[i] += atom.prob;
            }
            if atom.prob >= NULL_ATOM_TOL {
                tau_max = tau_max.max(atom.support.len());
            }
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidScheme(format!("atom probabilities sum to {total}, expected 1")));
        }
        if let Some(i) = marginals.iter().position(|&p| p <= 0.0) {
            return Err(Error::InvalidScheme(format!("block {i} has marginal probability 0")));
        }
        if tau_max == 0 {
            return Err(Error::InvalidScheme("all atoms are null".into()));
        }
        let probs: Vec<f64> = atoms.iter().map(|a| a.prob).collect();
        let cumulative = cumsum(&probs);
        Ok(Self { m, kind: SchemeKind::ExplicitAtoms { atoms, cumulative }, marginals, tau_max })
    }

    pub fn num_blocks(&self) -> usize {
        self.m
    }

    /// Exact marginals `p_i = P(eps_i = 1)`.
    pub fn marginals(&self) -> &[f64] {
        &self.marginals
    }

    pub fn p_min(&self) -> f64 {
        self.marginals.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Maximum number of blocks processed in parallel (essential supremum of
    /// the selected-block count).
    pub fn tau_max(&self) -> usize {
        self.tau_max
    }

    /// Expected number of blocks updated per iteration, `sum_i p_i`.
    pub fn expected_parallelism(&self) -> f64 {
        self.marginals.iter().sum()
    }

    /// Draw one selector into `mask`. Never returns the all-false mask.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, mask: &mut [bool]) {
        debug_assert_eq!(mask.len(), self.m);
        mask.fill(false);
        match &self.kind {
            SchemeKind::FullyParallel => mask.fill(true),
            SchemeKind::SerialNonuniform { cumulative, .. } => {
                mask[pick_index(cumulative, rng)] = true;
            }
            SchemeKind::TauNice { tau } => {
                // Fisher-Yates partial shuffle: first tau entries of a random
                // permutation, exactly uniform over size-tau subsets.
                let mut idx: Vec<usize> = (0..self.m).collect();
                for j in 0..*tau {
                    let k = j + rng.random_range(0..self.m - j);
                    idx.swap(j, k);
                    mask[idx[j]] = true;
                }
            }
            SchemeKind::ExplicitAtoms { atoms, cumulative } => {
                let a = &atoms[pick_index(cumulative, rng)];
                for &i in &a.support {
                    mask[i] = true;
                }
            }
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<bool> {
        let mut mask = vec![false; self.m];
        self.draw_into(rng, &mut mask);
        mask
    }

    /// The full support as (sorted subset, probability) pairs, or an error if
    /// it exceeds [`ENUMERATION_LIMIT`].
    pub fn support_atoms(&self) -> Result<Vec<(Vec<usize>, f64)>> {
        match &self.kind {
            SchemeKind::FullyParallel => Ok(vec![((0..self.m).collect(), 1.0)]),
            SchemeKind::SerialNonuniform { probs, .. } => {
                Ok(probs.iter().enumerate().map(|(i, &p)| (vec![i], p)).collect())
            }
            SchemeKind::ExplicitAtoms { atoms, .. } => {
                Ok(atoms.iter().map(|a| (a.support.clone(), a.prob)).collect())
            }
            SchemeKind::TauNice { tau } => {
                let count = binomial(self.m as u128, *tau as u128);
                if count > ENUMERATION_LIMIT {
                    return Err(Error::SupportTooLarge { atoms: count, limit: ENUMERATION_LIMIT });
                }
                let prob = 1.0 / count as f64;
                let mut out = Vec::with_capacity(count as usize);
                let mut comb: Vec<usize> = (0..*tau).collect();
                loop {
                    out.push((comb.clone(), prob));
                    // next lexicographic combination
                    let mut j = *tau;
                    loop {
                        if j == 0 {
                            return Ok(out);
                        }
                        j -= 1;
                        if comb[j] != j + self.m - *tau {
                            break;
                        }
                    }
                    comb[j] += 1;
                    for l in j + 1..*tau {
                        comb[l] = comb[l - 1] + 1;
                    }
                }
            }
        }
    }
}

fn cumsum(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|&p| {
            acc += p;
            acc
        })
        .collect()
}

fn pick_index<R: Rng + ?Sized>(cumulative: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc.saturating_mul(n - j) / (j + 1);
        if acc > ENUMERATION_LIMIT.saturating_mul(1000) {
            return u128::MAX / 2;
        }
    }
    acc
}

/// How a set of beta constants was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BetaMethod {
    ClosedFormTauNice,
    ClosedFormDoublyUniform,
    Enumeration,
}

/// The sampling-and-structure constants of the smoothness analysis.
///
/// `beta1[i]` is the operative expectation-level constant (the smaller of the
/// conditional-expectation value and the per-count refinement, both of which
/// certify the expectation-level smoothness condition); `beta2` the
/// almost-sure constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaConstants {
    pub beta1: Vec<f64>,
    /// `E[max_k sum_{j in I_k} eps_j | eps_i = 1]`.
    pub beta1_conditional: Vec<f64>,
    /// `sum_t t max_{k: i in I_k} P(sum_{j in I_k} eps_j = t | eps_i = 1)`.
    pub beta1_refined: Vec<f64>,
    pub beta2: f64,
    pub method: BetaMethod,
}

impl BetaConstants {
    /// Validates `1 <= beta1_i <= beta2 <= min(eta, tau_max)` up to rounding.
    fn validated(self, eta: usize, tau_max: usize) -> Result<Self> {
        let cap = eta.min(tau_max) as f64;
        const TOL: f64 = 1e-9;
        if self.beta2 > cap + TOL {
            return Err(Error::InvalidParameter(format!(
                "beta2 = {} exceeds min(eta, tau_max) = {cap}",
                self.beta2
            )));
        }
        for (i, &b) in self.beta1.iter().enumerate() {
            if b < 1.0 - TOL || b > self.beta2 + TOL {
                return Err(Error::InvalidParameter(format!(
                    "beta1[{i}] = {b} outside [1, beta2 = {}]",
                    self.beta2
                )));
            }
        }
        Ok(self)
    }
}

/// `beta_1 = 1 + (eta - 1)(tau - 1)/(m - 1)` for the tau-nice sampling.
///
/// Undefined for `m = 1`; a single block is necessarily serial, so callers
/// must use `beta_1 = 1` there.
pub fn beta_tau_nice(m: usize, eta: usize, tau: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::InvalidParameter(
            "beta_tau_nice needs m >= 2 (use beta1 = 1 for a single block)".into(),
        ));
    }
    if eta == 0 || eta > m || tau == 0 || tau > m {
        return Err(Error::InvalidParameter(format!(
            "beta_tau_nice needs 1 <= eta, tau <= m; got eta={eta}, tau={tau}, m={m}"
        )));
    }
    Ok(1.0 + ((eta - 1) * (tau - 1)) as f64 / (m - 1) as f64)
}

/// `beta_1 = 1 + (eta-1)/(m-1) (E[S^2]/E[S] - 1)` for a doubly-uniform
/// sampling with selected-count `S`.
pub fn beta_doubly_uniform(
    m: usize,
    eta: usize,
    first_moment: f64,
    second_moment: f64,
) -> Result<f64> {
    if m < 2 {
        return Err(Error::InvalidParameter("beta_doubly_uniform needs m >= 2".into()));
    }
    if eta == 0 || eta > m {
        return Err(Error::InvalidParameter(format!("eta={eta} outside [1, m={m}]")));
    }
    if !(first_moment > 0.0) {
        return Err(Error::InvalidParameter("first moment must be positive".into()));
    }
    if second_moment < first_moment {
        return Err(Error::InvalidParameter(
            "second moment must be at least the first (S takes integer values >= 1)".into(),
        ));
    }
    Ok(1.0 + (eta - 1) as f64 / (m - 1) as f64 * (second_moment / first_moment - 1.0))
}

/// Conservative almost-sure constant valid for any sampling: `min(eta, tau_max)`.
pub fn conservative_beta2(eta: usize, tau_max: usize) -> f64 {
    eta.min(tau_max) as f64
}

/// Exact beta constants by exhaustive enumeration of the sampling support.
///
/// Blocks not covered by any index set get `beta1_i = 1` (their Lipschitz
/// constant is zero, so the value never enters a stepsize).
pub fn beta_by_enumeration(
    scheme: &SamplingScheme,
    structure: &SeparabilityStructure,
) -> Result<BetaConstants> {
    let m = scheme.num_blocks();
    if structure.num_blocks() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: structure.num_blocks(),
            context: "beta_by_enumeration structure",
        });
    }
    let atoms = scheme.support_atoms()?;
    let sets = structure.index_sets();
    let eta = structure.eta();

    // k-lists covering each block, and position of the block inside each set
    let mut covers: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m];
    for (k, set) in sets.iter().enumerate() {
        for (local, &i) in set.iter().enumerate() {
            covers[i].push((k, local));
        }
    }

    // conditional count distributions: dist[k][local][t] = P(S_k = t, eps_i = 1)
    let mut dist: Vec<Vec<Vec<f64>>> =
        sets.iter().map(|s| vec![vec![0.0; eta + 1]; s.len()]).collect();
    let mut cond_acc = vec![0.0; m];
    let mut beta2: f64 = 0.0;

    let mut member = vec![false; m];
    let mut counts = vec![0usize; sets.len()];
    for (support, prob) in &atoms {
        for &i in support {
            member[i] = true;
        }
        for (k, set) in sets.iter().enumerate() {
            counts[k] = set.iter().filter(|&&i| member[i]).count();
        }
        let maxk = counts.iter().copied().max().unwrap_or(0);
        if *prob >= NULL_ATOM_TOL {
            beta2 = beta2.max(maxk as f64);
        }
        for &i in support {
            cond_acc[i] += prob * maxk as f64;
            for &(k, local) in &covers[i] {
                dist[k][local][counts[k]] += prob;
            }
        }
        for &i in support {
            member[i] = false;
        }
    }

    let p = scheme.marginals();
    let mut beta1_conditional = vec![1.0; m];
    let mut beta1_refined = vec![1.0; m];
    let mut beta1 = vec![1.0; m];
    for i in 0..m {
        if covers[i].is_empty() {
            continue;
        }
        let cond = cond_acc[i] / p[i];
        let mut refined = 0.0;
        for t in 1..=eta {
            let best = covers[i]
                .iter()
                .map(|&(k, local)| dist[k][local][t])
                .fold(0.0, f64::max);
            refined += t as f64 * best / p[i];
        }
        beta1_conditional[i] = cond;
        beta1_refined[i] = refined;
        beta1[i] = cond.min(refined);
    }

    BetaConstants {
        beta1,
        beta1_conditional,
        beta1_refined,
        beta2,
        method: BetaMethod::Enumeration,
    }
    .validated(eta, scheme.tau_max())
}

/// Closed-form constants for the tau-nice sampling paired with the
/// conservative almost-sure constant.
pub fn beta_closed_form_tau_nice(
    m: usize,
    eta: usize,
    tau: usize,
    tau_max: usize,
) -> Result<BetaConstants> {
    let b1 = if m == 1 { 1.0 } else { beta_tau_nice(m, eta, tau)? };
    BetaConstants {
        beta1: vec![b1; m],
        beta1_conditional: vec![b1; m],
        beta1_refined: vec![b1; m],
        beta2: conservative_beta2(eta, tau_max),
        method: BetaMethod::ClosedFormTauNice,
    }
    .validated(eta, tau_max)
}
