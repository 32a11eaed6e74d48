//! The parallel random block-coordinate forward-backward iteration.
//!
//! Each iteration draws a block selector, evaluates the partial gradients of
//! every selected block at the start-of-iteration point, applies the
//! blockwise prox with per-block stepsizes `gamma_i = delta / nu_i`, and
//! commits the masked update. The monotone variant evaluates the candidate
//! objective first and keeps the previous iterate whenever the objective
//! would increase.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::problems::{CompositeProblem, SmoothCache};
use crate::sampling::SamplingScheme;
use crate::smoothness::SmoothnessCertificate;

/// Stopping rules checked at every telemetry row.
#[derive(Debug, Clone, Copy, Default)]
pub struct StopRule {
    /// Threshold on the `Gamma^{-1}` norm of the full forward-backward
    /// residual `x - xbar`, evaluated over all blocks.
    pub residual_tol: Option<f64>,
    /// Stop once the objective reaches this value.
    pub f_target: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Stepsize aggressiveness: `gamma_i = delta / nu_i`, `0 < delta < 2`.
    pub delta: f64,
    pub certificate: SmoothnessCertificate,
    pub scheme: SamplingScheme,
    pub max_iters: u64,
    pub stop: StopRule,
    /// Use the objective safeguard (reject ascending candidates).
    pub monotone: bool,
    /// Relative acceptance slack for noisy objective evaluations; the strict
    /// rule is slack 0.
    pub monotone_slack: f64,
    pub seed: u64,
    /// Telemetry stride in iterations.
    pub record_every: u64,
    /// Force the strictly sequential per-iteration schedule. The default
    /// commit order is by block index either way.
    pub bitrepro: bool,
    /// Stepsize cap for blocks with `nu_i = 0` (uncoupled blocks).
    pub gamma_max: f64,
    /// Residual-cache rebuild stride, counted in block updates.
    pub cache_refresh_every: u64,
    /// Optional starting point; defaults to zero. Points outside `dom g` are
    /// projected blockwise (with a warning).
    pub x0: Option<Vec<f64>>,
}

impl SolverConfig {
    pub fn new(certificate: SmoothnessCertificate, scheme: SamplingScheme) -> Self {
        Self {
            delta: 1.0,
            certificate,
            scheme,
            max_iters: 1000,
            stop: StopRule::default(),
            monotone: false,
            monotone_slack: 0.0,
            seed: 0,
            record_every: 100,
            bitrepro: true,
            gamma_max: 1e6,
            cache_refresh_every: 10_000,
            x0: None,
        }
    }

    fn validate(&self, problem: &CompositeProblem) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 2.0) {
            return Err(Error::InvalidParameter(format!(
                "delta = {} outside the open interval (0, 2)",
                self.delta
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be >= 1".into()));
        }
        let m = problem.num_blocks();
        if self.certificate.nu.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: self.certificate.nu.len(),
                context: "certificate nu",
            });
        }
        if self.scheme.num_blocks() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: self.scheme.num_blocks(),
                context: "scheme blocks",
            });
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != problem.dim() {
                return Err(Error::DimensionMismatch {
                    expected: problem.dim(),
                    got: x0.len(),
                    context: "x0",
                });
            }
        }
        Ok(())
    }

    /// `gamma_i = min(delta / nu_i, gamma_max)`.
    pub fn stepsizes(&self) -> Vec<f64> {
        self.certificate
            .nu
            .iter()
            .map(|&nu| if nu > 0.0 { (self.delta / nu).min(self.gamma_max) } else { self.gamma_max })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetryRow {
    pub iter: u64,
    /// Iterations normalized by expected block updates: `iter * taubar / m`.
    pub epoch: f64,
    pub objective: f64,
    /// `Gamma^{-1}` norm of the full forward-backward residual.
    pub residual_norm: f64,
    pub rejections: u64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIters,
    ResidualTol,
    FTarget,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub rows: Vec<TelemetryRow>,
    pub final_x: Vec<f64>,
    /// Mapped primal iterate for dual problems maintaining one.
    pub final_primal: Option<Vec<f64>>,
    pub iters: u64,
    pub rejections: u64,
    pub seed: u64,
    pub stepsizes: Vec<f64>,
    pub stopped_by: StopReason,
    pub x0_projected: bool,
}

impl RunReport {
    /// Telemetry equality ignoring wall-clock columns, for reproducibility
    /// checks.
    pub fn deterministic_eq(&self, other: &RunReport) -> bool {
        self.final_x == other.final_x
            && self.iters == other.iters
            && self.rejections == other.rejections
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| {
                    a.iter == b.iter
                        && a.objective == b.objective
                        && a.residual_norm == b.residual_norm
                        && a.rejections == b.rejections
                })
    }
}

/// Snapshot handed to a per-iteration observer after the commit decision.
pub struct StepEvent<'a> {
    pub iter: u64,
    pub selected: &'a [usize],
    pub accepted: bool,
    pub x: &'a [f64],
    pub primal: Option<&'a [f64]>,
}

pub fn run(problem: &CompositeProblem, config: &SolverConfig) -> Result<RunReport> {
    run_with_observer(problem, config, |_| {})
}

pub fn run_with_observer<F: FnMut(&StepEvent)>(
    problem: &CompositeProblem,
    config: &SolverConfig,
    mut observer: F,
) -> Result<RunReport> {
    config.validate(problem)?;
    let start = Instant::now();
    let partition = problem.partition.clone();
    let m = partition.num_blocks();
    let gammas = config.stepsizes();
    let taubar = config.scheme.expected_parallelism();

    // initial point, projected into dom g blockwise if needed
    let mut x = config.x0.clone().unwrap_or_else(|| vec![0.0; problem.dim()]);
    let mut x0_projected = false;
    for i in 0..m {
        let r = partition.block_range(i);
        if problem.prox.project_domain(i, &mut x[r]) {
            x0_projected = true;
        }
    }
    if x0_projected {
        log::warn!("initial point was outside dom g; projected blockwise onto the domain");
    }

    let mut cache = problem.smooth.init_cache(&x);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut mask = vec![false; m];
    let mut selected: Vec<usize> = Vec::with_capacity(m);
    let mut offsets: Vec<usize> = Vec::with_capacity(m + 1);
    let mut grad_buf: Vec<f64> = Vec::new();
    let mut cand_buf: Vec<f64> = Vec::new();
    let mut old_buf: Vec<f64> = Vec::new();
    let mut delta_buf: Vec<f64> = Vec::new();

    let mut f_value = smooth_value(problem, cache.as_deref(), &x);
    let mut g_value = problem.separable_value(&x);
    let mut rejections: u64 = 0;
    let mut updates_since_refresh: u64 = 0;

    let mut rows = Vec::new();
    let mut stopped_by = StopReason::MaxIters;

    let record = |rows: &mut Vec<TelemetryRow>,
                  iter: u64,
                  objective: f64,
                  residual: f64,
                  rejections: u64| {
        rows.push(TelemetryRow {
            iter,
            epoch: iter as f64 * taubar / m as f64,
            objective,
            residual_norm: residual,
            rejections,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    };

    let initial_residual = full_residual_norm(problem, cache.as_deref(), &x, &gammas)?;
    record(&mut rows, 0, f_value + g_value, initial_residual, 0);
    if let (Some(tol), true) = (config.stop.residual_tol, config.max_iters > 0) {
        if initial_residual <= tol {
            return Ok(finish(
                rows, x, cache, 0, rejections, config, gammas, StopReason::ResidualTol, x0_projected,
            ));
        }
    }

    let mut iter: u64 = 0;
    while iter < config.max_iters {
        iter += 1;
        config.scheme.draw_into(&mut rng, &mut mask);
        selected.clear();
        selected.extend(mask.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)));

        // pack per-block scratch offsets
        offsets.clear();
        let mut total = 0usize;
        for &i in &selected {
            offsets.push(total);
            total += partition.block_range(i).len();
        }
        offsets.push(total);
        grad_buf.resize(total, 0.0);
        cand_buf.resize(total, 0.0);

        // phase 1: gradients at the start-of-iteration point and prox
        // candidates for every selected block, before any write
        {
            let mut grad_slots: Vec<&mut [f64]> = Vec::with_capacity(selected.len());
            let mut cand_slots: Vec<&mut [f64]> = Vec::with_capacity(selected.len());
            split_slots(&mut grad_buf, &offsets, &mut grad_slots);
            split_slots(&mut cand_buf, &offsets, &mut cand_slots);
            let x_ref: &[f64] = &x;
            let cache_ref = cache.as_deref();
            let compute = |(&block, (z, cand)): (&usize, (&mut &mut [f64], &mut &mut [f64]))| -> Result<()> {
                let range = partition.block_range(block);
                match cache_ref {
                    Some(c) => c.partial_gradient(x_ref, range.clone(), z),
                    None => problem.smooth.partial_gradient(x_ref, range.clone(), z),
                }
                let gamma = gammas[block];
                for (zj, &xj) in z.iter_mut().zip(&x_ref[range]) {
                    *zj = xj - gamma * *zj;
                }
                problem.prox.prox_block(block, z, gamma, cand)
            };
            if config.bitrepro || selected.len() == 1 {
                selected
                    .iter()
                    .zip(grad_slots.iter_mut().zip(cand_slots.iter_mut()))
                    .try_for_each(compute)?;
            } else {
                selected
                    .par_iter()
                    .zip(grad_slots.par_iter_mut().zip(cand_slots.par_iter_mut()))
                    .try_for_each(compute)?;
            }
        }

        // phase 2: commit (in block order), with objective safeguard if asked
        let mut changed = 0u64;
        if config.monotone {
            let mut any_change = false;
            for (s, &i) in selected.iter().enumerate() {
                let r = partition.block_range(i);
                if x[r.clone()] != cand_buf[offsets[s]..offsets[s + 1]] {
                    any_change = true;
                    break;
                }
            }
            if any_change {
                let snapshot = cache.as_deref().map(|c| c.snapshot());
                old_buf.resize(total, 0.0);
                let mut g_new = g_value;
                for (s, &i) in selected.iter().enumerate() {
                    let r = partition.block_range(i);
                    let slot = offsets[s]..offsets[s + 1];
                    old_buf[slot.clone()].copy_from_slice(&x[r.clone()]);
                    let cand = &cand_buf[slot.clone()];
                    if cand == &old_buf[slot.clone()] {
                        continue;
                    }
                    if !problem.prox.is_zero() {
                        g_new += problem.prox.value_block(i, cand)
                            - problem.prox.value_block(i, &old_buf[slot.clone()]);
                    }
                    delta_buf.clear();
                    delta_buf.extend(
                        cand.iter().zip(&old_buf[slot.clone()]).map(|(c, o)| c - o),
                    );
                    x[r.clone()].copy_from_slice(cand);
                    if let Some(c) = cache.as_deref_mut() {
                        c.apply_block_delta(r, &delta_buf);
                    }
                    changed += 1;
                }
                let f_new = smooth_value(problem, cache.as_deref(), &x);
                let f_old_total = f_value + g_value;
                let accept =
                    f_new + g_new <= f_old_total + config.monotone_slack * (1.0 + f_old_total.abs());
                if accept {
                    f_value = f_new;
                    g_value = g_new;
                    updates_since_refresh += changed;
                } else {
                    for (s, &i) in selected.iter().enumerate() {
                        let r = partition.block_range(i);
                        x[r].copy_from_slice(&old_buf[offsets[s]..offsets[s + 1]]);
                    }
                    if let (Some(c), Some(snap)) = (cache.as_deref_mut(), snapshot.as_ref()) {
                        c.restore(snap);
                    }
                    rejections += 1;
                }
                observer(&StepEvent {
                    iter,
                    selected: &selected,
                    accepted: accept,
                    x: &x,
                    primal: cache.as_deref().and_then(|c| c.primal()),
                });
            } else {
                observer(&StepEvent {
                    iter,
                    selected: &selected,
                    accepted: true,
                    x: &x,
                    primal: cache.as_deref().and_then(|c| c.primal()),
                });
            }
        } else {
            for (s, &i) in selected.iter().enumerate() {
                let r = partition.block_range(i);
                let slot = offsets[s]..offsets[s + 1];
                let cand = &cand_buf[slot];
                if cand == &x[r.clone()] {
                    continue;
                }
                if !problem.prox.is_zero() {
                    g_value += problem.prox.value_block(i, cand)
                        - problem.prox.value_block(i, &x[r.clone()]);
                }
                delta_buf.clear();
                delta_buf.extend(cand.iter().zip(&x[r.clone()]).map(|(c, o)| c - o));
                x[r.clone()].copy_from_slice(cand);
                if let Some(c) = cache.as_deref_mut() {
                    c.apply_block_delta(r, &delta_buf);
                }
                changed += 1;
            }
            updates_since_refresh += changed;
            observer(&StepEvent {
                iter,
                selected: &selected,
                accepted: true,
                x: &x,
                primal: cache.as_deref().and_then(|c| c.primal()),
            });
        }

        // drift control
        if updates_since_refresh >= config.cache_refresh_every {
            if let Some(c) = cache.as_deref_mut() {
                c.rebuild(&x);
            }
            g_value = problem.separable_value(&x);
            f_value = smooth_value(problem, cache.as_deref(), &x);
            updates_since_refresh = 0;
        }

        // telemetry and stop checks
        if iter % config.record_every == 0 || iter == config.max_iters {
            let objective = if config.monotone {
                f_value + g_value
            } else {
                smooth_value(problem, cache.as_deref(), &x) + problem.separable_value(&x)
            };
            let residual = full_residual_norm(problem, cache.as_deref(), &x, &gammas)?;
            record(&mut rows, iter, objective, residual, rejections);
            if let Some(tol) = config.stop.residual_tol {
                if residual <= tol {
                    stopped_by = StopReason::ResidualTol;
                    break;
                }
            }
            if let Some(target) = config.stop.f_target {
                if objective <= target {
                    stopped_by = StopReason::FTarget;
                    break;
                }
            }
        }
    }

    Ok(finish(rows, x, cache, iter, rejections, config, gammas, stopped_by, x0_projected))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    rows: Vec<TelemetryRow>,
    x: Vec<f64>,
    cache: Option<Box<dyn SmoothCache>>,
    iters: u64,
    rejections: u64,
    config: &SolverConfig,
    stepsizes: Vec<f64>,
    stopped_by: StopReason,
    x0_projected: bool,
) -> RunReport {
    RunReport {
        rows,
        final_primal: cache.as_deref().and_then(|c| c.primal().map(<[f64]>::to_vec)),
        final_x: x,
        iters,
        rejections,
        seed: config.seed,
        stepsizes,
        stopped_by,
        x0_projected,
    }
}

fn smooth_value(problem: &CompositeProblem, cache: Option<&dyn SmoothCache>, x: &[f64]) -> f64 {
    match cache {
        Some(c) => c.value(x),
        None => problem.smooth.value(x),
    }
}

/// `Gamma^{-1}` norm of the full forward-backward residual `x - xbar`,
/// evaluated over all blocks on a candidate pass that does not modify state.
pub fn full_residual_norm(
    problem: &CompositeProblem,
    cache: Option<&dyn SmoothCache>,
    x: &[f64],
    gammas: &[f64],
) -> Result<f64> {
    let partition = &problem.partition;
    let mut acc = 0.0;
    let mut grad = vec![0.0; partition.dims().iter().copied().max().unwrap_or(1)];
    let mut cand = grad.clone();
    for i in 0..partition.num_blocks() {
        let r = partition.block_range(i);
        let d = r.len();
        match cache {
            Some(c) => c.partial_gradient(x, r.clone(), &mut grad[..d]),
            None => problem.smooth.partial_gradient(x, r.clone(), &mut grad[..d]),
        }
        let gamma = gammas[i];
        for (zj, &xj) in grad[..d].iter_mut().zip(&x[r.clone()]) {
            *zj = xj - gamma * *zj;
        }
        problem.prox.prox_block(i, &grad[..d], gamma, &mut cand[..d])?;
        let diff_sq: f64 = cand[..d]
            .iter()
            .zip(&x[r])
            .map(|(c, xv)| (c - xv) * (c - xv))
            .sum();
        acc += diff_sq / gamma;
    }
    Ok(acc.sqrt())
}

fn split_slots<'a>(buf: &'a mut [f64], offsets: &[usize], out: &mut Vec<&'a mut [f64]>) {
    let mut rest = buf;
    let mut consumed = 0usize;
    for w in offsets.windows(2) {
        let (_, tail) = std::mem::take(&mut rest).split_at_mut(w[0] - consumed);
        let (slot, tail) = tail.split_at_mut(w[1] - w[0]);
        out.push(slot);
        rest = tail;
        consumed = w[1];
    }
}

/// Ensemble statistics over seeds, on the shared telemetry grid.
///
/// Stop rules are ignored so every seed records the same iterations; runs
/// execute in parallel, each with its own generator stream.
#[derive(Debug, Clone)]
pub struct AveragedReport {
    pub iters: Vec<u64>,
    pub epochs: Vec<f64>,
    pub mean_objective: Vec<f64>,
    pub stderr_objective: Vec<f64>,
    pub per_seed: Vec<RunReport>,
}

pub fn run_ensemble(
    problem: &CompositeProblem,
    config: &SolverConfig,
    seeds: &[u64],
) -> Result<AveragedReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("need at least one seed".into()));
    }
    let reports: Result<Vec<RunReport>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = config.clone();
            cfg.seed = seed;
            cfg.stop = StopRule::default();
            run(problem, &cfg)
        })
        .collect();
    let reports = reports?;
    let grid = &reports[0].rows;
    let n = grid.len();
    for r in &reports {
        if r.rows.len() != n || r.rows.iter().zip(grid).any(|(a, b)| a.iter != b.iter) {
            return Err(Error::InvalidParameter("telemetry grids differ across seeds".into()));
        }
    }
    let mut mean = vec![0.0; n];
    let mut stderr = vec![0.0; n];
    for row in 0..n {
        let vals: Vec<f64> = reports.iter().map(|r| r.rows[row].objective).collect();
        let mu = vals.iter().sum::<f64>() / vals.len() as f64;
        mean[row] = mu;
        if vals.len() > 1 {
            let var =
                vals.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (vals.len() - 1) as f64;
            stderr[row] = (var / vals.len() as f64).sqrt();
        }
    }
    Ok(AveragedReport {
        iters: grid.iter().map(|r| r.iter).collect(),
        epochs: grid.iter().map(|r| r.epoch).collect(),
        mean_objective: mean,
        stderr_objective: stderr,
        per_seed: reports,
    })
}
