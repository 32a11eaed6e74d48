//! Closed-form convergence bounds, error-bound diagnostics, and duality-gap
//! certificates, emitted alongside empirical curves for bound-vs-run
//! comparison.

use crate::block::weighted_norm_sq_flat;
use crate::error::{Error, Result};
use crate::problems::CompositeProblem;
use crate::smoothness::SmoothnessCertificate;

/// Inputs of the rate bounds: distances, initial gap, sampling floor, and
/// strong-convexity moduli measured in the `Gamma^{-1}` norm.
#[derive(Debug, Clone, Copy)]
pub struct RateBoundInputs {
    /// Estimate of `dist^2_W(x^0, S_*)`.
    pub dist_w_sq: f64,
    /// `F(x^0) - F_*`.
    pub f0_gap: f64,
    pub p_min: f64,
    pub delta: f64,
    pub mu_gamma: f64,
    pub sigma_gamma: f64,
    /// Error-bound constant `c_{X,Gamma^{-1}}`, when known.
    pub c_eb: Option<f64>,
}

impl RateBoundInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_min > 0.0 && self.p_min <= 1.0) {
            return Err(Error::InvalidParameter(format!("p_min = {} outside (0, 1]", self.p_min)));
        }
        if !(self.delta > 0.0 && self.delta < 2.0) {
            return Err(Error::InvalidParameter(format!("delta = {} outside (0, 2)", self.delta)));
        }
        if self.mu_gamma < 0.0 || self.sigma_gamma < 0.0 {
            return Err(Error::InvalidParameter("moduli must be nonnegative".into()));
        }
        if self.mu_gamma > self.delta + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "mu_Gamma = {} exceeds delta = {}; the modulus never exceeds min_i gamma_i nu_i",
                self.mu_gamma, self.delta
            )));
        }
        if self.dist_w_sq < 0.0 || self.f0_gap < 0.0 {
            return Err(Error::InvalidParameter("distances and gaps must be nonnegative".into()));
        }
        Ok(())
    }
}

fn relaxation_factor(delta: f64) -> f64 {
    (1.0 / (2.0 - delta)).max(1.0)
}

/// `[dist^2_W/2 + (max{1, (2-delta)^{-1}}/p_min - 1) F0_gap] / n`.
pub fn sublinear_bound(inputs: &RateBoundInputs, n: u64) -> Result<f64> {
    inputs.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter("sublinear_bound needs n >= 1".into()));
    }
    let bracket = inputs.dist_w_sq / 2.0
        + (relaxation_factor(inputs.delta) / inputs.p_min - 1.0) * inputs.f0_gap;
    Ok(bracket / n as f64)
}

/// `(p_min dist^2_W/2 + max{1, (2-delta)^{-1}} F0_gap) / (1 + p_min n)`.
pub fn sublinear_bound_v2(inputs: &RateBoundInputs, n: u64) -> Result<f64> {
    inputs.validate()?;
    let numerator = inputs.p_min * inputs.dist_w_sq / 2.0
        + relaxation_factor(inputs.delta) * inputs.f0_gap;
    Ok(numerator / (1.0 + inputs.p_min * n as f64))
}

/// Linear factor under strong convexity (`delta <= 1`):
/// `rho = 1 - 2 p_min (mu + sigma)/(1 + mu + 2 sigma)`.
pub fn strong_convexity_rate(inputs: &RateBoundInputs) -> Result<f64> {
    inputs.validate()?;
    let (mu, sigma) = (inputs.mu_gamma, inputs.sigma_gamma);
    if mu + sigma <= 0.0 {
        return Err(Error::BoundInapplicable(
            "strong_convexity_rate needs mu_Gamma + sigma_Gamma > 0".into(),
        ));
    }
    if inputs.delta > 1.0 {
        return Err(Error::BoundInapplicable("strong_convexity_rate needs delta <= 1".into()));
    }
    let rho = 1.0 - 2.0 * inputs.p_min * (mu + sigma) / (1.0 + mu + 2.0 * sigma);
    debug_assert!((0.0..1.0).contains(&rho));
    Ok(rho)
}

/// Initial constant multiplying `rho^n` in the strong-convexity bound:
/// `p_min (1 + sigma) dist^2_W/2 + F0_gap`.
pub fn strong_convexity_constant(inputs: &RateBoundInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(inputs.p_min * (1.0 + inputs.sigma_gamma) * inputs.dist_w_sq / 2.0 + inputs.f0_gap)
}

/// Linear factor under the Luo-Tseng error bound:
/// `rho = 1 - p_min min{1, (2-delta)/(2 c)}`.
pub fn error_bound_rate(inputs: &RateBoundInputs) -> Result<f64> {
    inputs.validate()?;
    let c = inputs
        .c_eb
        .ok_or_else(|| Error::BoundInapplicable("error_bound_rate needs c_eb".into()))?;
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("c_eb = {c} must be positive")));
    }
    let rho = 1.0 - inputs.p_min * (1.0_f64).min((2.0 - inputs.delta) / (2.0 * c));
    debug_assert!((0.0..1.0).contains(&rho));
    Ok(rho)
}

/// Iterate-norm factor `rho^{1/2}` associated with [`error_bound_rate`].
pub fn error_bound_iterate_rate(inputs: &RateBoundInputs) -> Result<f64> {
    Ok(error_bound_rate(inputs)?.sqrt())
}

/// Duality-gap certificate for an `alpha`-strongly-convex conjugate term:
/// `G(x, u) <= (1 + ||A||^2/(alpha mu)) (D(u) - inf D)`.
pub fn duality_gap_strongly_convex(
    d_gap: f64,
    a_norm: f64,
    alpha: f64,
    mu: f64,
) -> Result<f64> {
    if !(alpha > 0.0) || !(mu > 0.0) {
        return Err(Error::InvalidParameter("moduli must be positive".into()));
    }
    if d_gap < 0.0 {
        return Err(Error::InvalidParameter(format!("dual gap {d_gap} negative")));
    }
    Ok((1.0 + a_norm * a_norm / (alpha * mu)) * d_gap)
}

/// Duality-gap certificate for a `theta`-Lipschitz loss:
/// `G(x, u) <= 2 ||A|| theta / sqrt(mu) * sqrt(D(u) - inf D)`, valid while
/// `D(u) - inf D < ||A||^2 theta^2 / mu`.
pub fn duality_gap_lipschitz(d_gap: f64, a_norm: f64, theta: f64, mu: f64) -> Result<f64> {
    if !(theta > 0.0) || !(mu > 0.0) {
        return Err(Error::InvalidParameter("theta and mu must be positive".into()));
    }
    if d_gap < 0.0 {
        return Err(Error::InvalidParameter(format!("dual gap {d_gap} negative")));
    }
    let proviso = a_norm * a_norm * theta * theta / mu;
    if d_gap >= proviso {
        return Err(Error::BoundInapplicable(format!(
            "dual gap {d_gap} >= ||A||^2 theta^2 / mu = {proviso}; iterate further before \
             applying the certificate"
        )));
    }
    Ok(2.0 * a_norm * theta / mu.sqrt() * d_gap.sqrt())
}

/// Empirical error-bound probe: max over probe points of
/// `dist_{Gamma^{-1}}(x, x_ref) / ||x - xbar||_{Gamma^{-1}}`, a lower bound on
/// any valid `c_{X,Gamma^{-1}}` when `x_ref` spans the solution set.
#[derive(Debug, Clone)]
pub struct EbEstimate {
    pub c_hat: f64,
    pub probes_used: usize,
    pub probes_skipped: usize,
}

pub fn estimate_eb_constant(
    problem: &CompositeProblem,
    reference_solution: &[f64],
    gammas: &[f64],
    probe_points: &[Vec<f64>],
) -> Result<EbEstimate> {
    let n = problem.dim();
    if reference_solution.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: reference_solution.len(),
            context: "reference solution",
        });
    }
    let partition = &problem.partition;
    let inv_gamma: Vec<f64> = gammas.iter().map(|&g| 1.0 / g).collect();
    let mut c_hat: f64 = 0.0;
    let mut used = 0;
    let mut skipped = 0;
    for probe in probe_points {
        if probe.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: probe.len(),
                context: "probe point",
            });
        }
        let residual = crate::solver::full_residual_norm(problem, None, probe, gammas)?;
        let scale: f64 = probe.iter().map(|v| v * v).sum::<f64>().sqrt();
        if residual <= 1e-14 * (1.0 + scale) {
            skipped += 1;
            continue;
        }
        let diff: Vec<f64> =
            probe.iter().zip(reference_solution).map(|(a, b)| a - b).collect();
        let dist = weighted_norm_sq_flat(&diff, partition, &inv_gamma)?.sqrt();
        c_hat = c_hat.max(dist / residual);
        used += 1;
    }
    if used == 0 {
        return Err(Error::BoundInapplicable(
            "every probe point had a vanishing forward-backward residual".into(),
        ));
    }
    Ok(EbEstimate { c_hat, probes_used: used, probes_skipped: skipped })
}

/// Output of the deterministic reference solve.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub x: Vec<f64>,
    pub f_star: f64,
    pub residual_norm: f64,
    pub iters: u64,
}

/// High-accuracy deterministic forward-backward solve with `delta = 1` on the
/// given certificate, used as the `F_*` oracle. Runs until the `Gamma^{-1}`
/// residual drops below `tol` or `max_iters` is reached.
pub fn reference_solution(
    problem: &CompositeProblem,
    certificate: &SmoothnessCertificate,
    max_iters: u64,
    tol: f64,
) -> Result<ReferenceSolution> {
    let partition = &problem.partition;
    let n = problem.dim();
    let m = partition.num_blocks();
    if certificate.nu.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: certificate.nu.len(),
            context: "reference certificate",
        });
    }
    let gammas: Vec<f64> =
        certificate.nu.iter().map(|&nu| if nu > 0.0 { 1.0 / nu } else { 1e6 }).collect();
    let mut x = vec![0.0; n];
    for i in 0..m {
        let r = partition.block_range(i);
        problem.prox.project_domain(i, &mut x[r]);
    }
    let mut grad = vec![0.0; n];
    let mut cand = vec![0.0; n];
    let mut iters = 0;
    let mut residual = f64::INFINITY;
    while iters < max_iters {
        problem.smooth.gradient(&x, &mut grad);
        let mut acc = 0.0;
        for i in 0..m {
            let r = partition.block_range(i);
            let gamma = gammas[i];
            for j in r.clone() {
                grad[j] = x[j] - gamma * grad[j];
            }
            let (z, out_range) = (&grad[r.clone()], r.clone());
            problem.prox.prox_block(i, z, gamma, &mut cand[out_range.clone()])?;
            let diff_sq: f64 = cand[out_range.clone()]
                .iter()
                .zip(&x[out_range])
                .map(|(c, xv)| (c - xv) * (c - xv))
                .sum();
            acc += diff_sq / gamma;
        }
        x.copy_from_slice(&cand);
        iters += 1;
        residual = acc.sqrt();
        if residual <= tol {
            break;
        }
    }
    let f_star = problem.objective(&x);
    Ok(ReferenceSolution { x, f_star, residual_norm: residual, iters })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs() -> RateBoundInputs {
        RateBoundInputs {
            dist_w_sq: 2.0,
            f0_gap: 1.0,
            p_min: 0.5,
            delta: 1.0,
            mu_gamma: 0.0,
            sigma_gamma: 0.0,
            c_eb: None,
        }
    }

    #[test]
    fn sublinear_examples() {
        // p_min = 1, delta = 1: bracket reduces to dist^2/2
        let mut i = inputs();
        i.p_min = 1.0;
        assert_eq!(sublinear_bound(&i, 4).unwrap(), 0.25);

        // delta -> 2 diverges
        let mut d = inputs();
        d.delta = 1.999_999;
        assert!(sublinear_bound(&d, 1).unwrap() > 1e5);

        // worked example: (1 + (2-1)*1)/10 = 0.2
        assert!((sublinear_bound(&inputs(), 10).unwrap() - 0.2).abs() < 1e-15);

        assert!(sublinear_bound(&inputs(), 0).is_err());
    }

    #[test]
    fn sublinear_v2_examples() {
        // n = 0: denominator 1
        let i = inputs();
        let at0 = sublinear_bound_v2(&i, 0).unwrap();
        assert!((at0 - (0.5 * 1.0 + 1.0)).abs() < 1e-15);

        // p_min = 1, delta = 1: (dist/2 + gap)/(1+n)
        let mut u = inputs();
        u.p_min = 1.0;
        assert!((sublinear_bound_v2(&u, 3).unwrap() - (1.0 + 1.0) / 4.0).abs() < 1e-15);

        // uniform-sampling specialization p = tau/m
        let mut s = inputs();
        s.p_min = 0.25; // tau = 1, m = 4
        let b = sublinear_bound_v2(&s, 8).unwrap();
        assert!((b - (0.25 + 1.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn strong_convexity_examples() {
        // p_min = 1, sigma = 0: rho = (1 - mu)/(1 + mu)
        let mut i = inputs();
        i.p_min = 1.0;
        i.mu_gamma = 0.3;
        let rho = strong_convexity_rate(&i).unwrap();
        assert!((rho - (1.0 - 0.3) / (1.0 + 0.3)).abs() < 1e-15);

        // mu + sigma -> 0+ drives rho -> 1
        let mut t = inputs();
        t.mu_gamma = 1e-9;
        assert!(strong_convexity_rate(&t).unwrap() > 1.0 - 1e-8);
        t.mu_gamma = 0.0;
        assert!(strong_convexity_rate(&t).is_err());

        // worked example: 1 - 2*0.5*0.5/1.5 = 2/3
        let mut w = inputs();
        w.mu_gamma = 0.5;
        assert!((strong_convexity_rate(&w).unwrap() - 2.0 / 3.0).abs() < 1e-15);

        // delta > 1 rejected
        let mut d = inputs();
        d.mu_gamma = 0.5;
        d.delta = 1.5;
        assert!(strong_convexity_rate(&d).is_err());

        // constant: p_min (1 + sigma) dist/2 + gap
        let mut c = inputs();
        c.sigma_gamma = 1.0;
        c.mu_gamma = 0.5;
        assert!((strong_convexity_constant(&c).unwrap() - (0.5 * 2.0 * 1.0 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn error_bound_examples() {
        // c <= (2 - delta)/2: the min attains 1, rho = 1 - p_min
        let mut i = inputs();
        i.c_eb = Some(0.4);
        assert!((error_bound_rate(&i).unwrap() - 0.5).abs() < 1e-15);

        // p_min = 1, delta = 1, c = 2: 1 - min(1, 1/4) = 0.75
        let mut w = inputs();
        w.p_min = 1.0;
        w.c_eb = Some(2.0);
        assert!((error_bound_rate(&w).unwrap() - 0.75).abs() < 1e-15);
        assert!((error_bound_iterate_rate(&w).unwrap() - 0.75_f64.sqrt()).abs() < 1e-15);

        // monotone in c, antitone in p_min
        let mut a = inputs();
        a.c_eb = Some(1.0);
        let mut b = inputs();
        b.c_eb = Some(3.0);
        assert!(error_bound_rate(&a).unwrap() <= error_bound_rate(&b).unwrap());
        let mut c = inputs();
        c.c_eb = Some(1.0);
        c.p_min = 0.9;
        assert!(error_bound_rate(&c).unwrap() <= error_bound_rate(&a).unwrap());

        assert!(error_bound_rate(&inputs()).is_err());
    }

    #[test]
    fn duality_gap_examples() {
        assert_eq!(duality_gap_strongly_convex(0.0, 3.0, 1.0, 2.0).unwrap(), 0.0);
        // ||A||^2 = alpha mu: factor 2
        assert!((duality_gap_strongly_convex(0.7, 2.0, 2.0, 2.0).unwrap() - 1.4).abs() < 1e-15);
        assert!(duality_gap_strongly_convex(0.1, 1.0, 0.0, 1.0).is_err());

        assert_eq!(duality_gap_lipschitz(0.0, 1.0, 1.0, 1.0).unwrap(), 0.0);
        // ||A|| = theta = mu = 1, gap 0.25 -> 2*0.5 = 1
        assert!((duality_gap_lipschitz(0.25, 1.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        // proviso violated
        assert!(matches!(
            duality_gap_lipschitz(1.5, 1.0, 1.0, 1.0),
            Err(Error::BoundInapplicable(_))
        ));
    }

    #[test]
    fn rate_factors_stay_in_unit_interval() {
        for &p_min in &[0.05, 0.3, 1.0] {
            for &delta in &[0.2, 1.0, 1.7] {
                for &c in &[0.1, 1.0, 25.0] {
                    let i = RateBoundInputs {
                        dist_w_sq: 1.0,
                        f0_gap: 1.0,
                        p_min,
                        delta,
                        mu_gamma: 0.0,
                        sigma_gamma: 0.0,
                        c_eb: Some(c),
                    };
                    let rho = error_bound_rate(&i).unwrap();
                    assert!((0.0..1.0).contains(&rho), "rho = {rho}");
                }
                if delta <= 1.0 {
                    for &mu in &[0.05 * delta, 0.5 * delta, delta] {
                        let i = RateBoundInputs {
                            dist_w_sq: 1.0,
                            f0_gap: 1.0,
                            p_min,
                            delta,
                            mu_gamma: mu,
                            sigma_gamma: 0.2,
                            c_eb: None,
                        };
                        let rho = strong_convexity_rate(&i).unwrap();
                        assert!((0.0..1.0).contains(&rho), "rho = {rho}");
                    }
                }
            }
        }
    }

    #[test]
    fn eb_probe_on_scalar_quadratic() {
        // f = nu/2 x^2, g = 0, gamma = 1/nu: residual equals |x| and the
        // distance ratio is exactly 1
        use crate::problems::{make_ridge_dual};
        use crate::sparse::DenseMatrix;
        // ridge with K = 0.5, lambda m = 0.5 gives f = 1/2 x^2 - y x with y = 0
        let mut k = DenseMatrix::zeros(1, 1);
        k.set(0, 0, 0.5);
        let prob = make_ridge_dual(k, vec![0.0], 0.5, None).unwrap();
        // nu = L = K_00 + lambda m = 1, gamma = 1
        let est = estimate_eb_constant(
            &prob,
            &[0.0],
            &[1.0],
            &[vec![2.0], vec![-0.7], vec![0.0]],
        )
        .unwrap();
        assert!((est.c_hat - 1.0).abs() < 1e-12);
        assert_eq!(est.probes_used, 2);
        assert_eq!(est.probes_skipped, 1); // the probe at the solution
    }
}
