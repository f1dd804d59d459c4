//! Seeded random cross-checks of the closed-form optimum against the KKT
//! oracle.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::markowitz::MarkowitzContext;
use crate::mimicking::solve;
use crate::model::{InvestorGroup, MarketModel};
use crate::oracle::kkt_solve;

/// Largest accepted max-norm relative gap between the two solution paths.
pub const AGREEMENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyConfig {
    pub count: usize,
    pub max_k: usize,
    pub max_n: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            count: 500,
            max_k: 10,
            max_n: 10,
            seed: 7,
        }
    }
}

/// Covariance `F F' / k + ridge I` with `F` uniform in `[-0.3, 0.3]` and
/// ridge in `[0.005, 0.05]`; means uniform in `[-0.05, 0.2]`.
pub fn random_market<R: Rng>(rng: &mut R, k: usize) -> MarketModel {
    let factor = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-0.3..0.3));
    let ridge = rng.gen_range(0.005..0.05);
    let sigma = &factor * factor.transpose() / k as f64 + DMatrix::identity(k, k) * ridge;
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    let mu = DVector::from_fn(k, |_, _| rng.gen_range(-0.05..0.2));
    MarketModel::new(mu, sigma).expect("ridge keeps the covariance positive definite")
}

/// Point on the open simplex from normalized exponential draws.
pub fn random_simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln() + 1e-12).collect();
    let total: f64 = draws.iter().sum();
    draws.iter().map(|d| d / total).collect()
}

/// Group with `alpha` in `(alpha_lo, 20]`, `phi` in `[0, 20]`, random wealth.
pub fn random_group<R: Rng>(rng: &mut R, n: usize, alpha_lo: f64) -> InvestorGroup {
    let alpha: Vec<f64> = (0..n).map(|_| 20.0 - rng.gen::<f64>() * (20.0 - alpha_lo)).collect();
    let phi: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=20.0)).collect();
    let beta = random_simplex(rng, n);
    InvestorGroup::from_slices(&alpha, &beta, &phi).expect("random group is valid")
}

/// Instance `index` drawn from its own seed, so failures can be replayed.
pub fn random_instance(seed: u64, max_k: usize, max_n: usize) -> (MarketModel, InvestorGroup) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(2..=max_k);
    let n = rng.gen_range(2..=max_n);
    let market = random_market(&mut rng, k);
    let group = random_group(&mut rng, n, 0.1);
    (market, group)
}

/// `max |a - b| / max |a|`
pub fn max_relative_error(reference: &DMatrix<f64>, other: &DMatrix<f64>) -> f64 {
    (reference - other).amax() / reference.amax()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Disagreement {
    pub index: usize,
    pub instance_seed: u64,
    pub k: usize,
    pub n: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub worst_weight_error: f64,
    pub worst_lambda_error: f64,
    pub worst_q_ones: f64,
    pub worst_residual: f64,
    pub failures: Vec<Disagreement>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.config;
        writeln!(
            f,
            "verify: {} instances (k <= {}, n <= {}, seed {})",
            c.count, c.max_k, c.max_n, c.seed
        )?;
        if c.count == 0 {
            return writeln!(f, "0 instances checked; nothing to compare");
        }
        writeln!(f, "worst relative weight error: {:.3e}", self.worst_weight_error)?;
        writeln!(f, "worst multiplier error:      {:.3e}", self.worst_lambda_error)?;
        writeln!(f, "worst |Q 1| / max|Q|:        {:.3e}", self.worst_q_ones)?;
        writeln!(f, "worst scaled KKT residual:   {:.3e}", self.worst_residual)?;
        for d in &self.failures {
            writeln!(
                f,
                "FAIL instance {} (seed {}, k = {}, n = {}): {}",
                d.index, d.instance_seed, d.k, d.n, d.detail
            )?;
        }
        if self.passed() {
            writeln!(f, "PASS: all instances agree within {AGREEMENT_TOL:e}")
        } else {
            writeln!(f, "FAIL: {} of {} instances disagree", self.failures.len(), c.count)
        }
    }
}

/// Outcome of checking one instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceCheck {
    pub weight_error: f64,
    pub lambda_error: f64,
    pub q_ones: f64,
    pub residual: f64,
}

pub fn check_instance(market: &MarketModel, group: &InvestorGroup) -> Result<InstanceCheck> {
    let ctx = MarkowitzContext::new(market)?;
    let closed = solve(&ctx, group)?;
    let oracle = kkt_solve(market, group)?;
    let lambda = crate::oracle::lambda_closed_form(&ctx, group)?;

    let q_ones = (ctx.q() * DVector::from_element(market.k(), 1.0)).amax() / ctx.q().amax();
    Ok(InstanceCheck {
        weight_error: max_relative_error(closed.w_star.as_matrix(), oracle.w.as_matrix()),
        lambda_error: (&lambda - &oracle.lambda).amax(),
        q_ones,
        residual: oracle.residual,
    })
}

pub fn run(config: VerifyConfig) -> Result<VerifyReport> {
    if config.max_k < 2 || config.max_n < 2 {
        return Err(Error::Config("max-k and max-n must be at least 2".into()));
    }
    let mut master = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = VerifyReport {
        config,
        worst_weight_error: 0.0,
        worst_lambda_error: 0.0,
        worst_q_ones: 0.0,
        worst_residual: 0.0,
        failures: Vec::new(),
    };
    for index in 0..config.count {
        let instance_seed: u64 = master.gen();
        let (market, group) = random_instance(instance_seed, config.max_k, config.max_n);
        let fail = |detail: String| Disagreement {
            index,
            instance_seed,
            k: market.k(),
            n: group.n(),
            detail,
        };
        match check_instance(&market, &group) {
            Ok(check) => {
                report.worst_weight_error = report.worst_weight_error.max(check.weight_error);
                report.worst_lambda_error = report.worst_lambda_error.max(check.lambda_error);
                report.worst_q_ones = report.worst_q_ones.max(check.q_ones);
                report.worst_residual = report.worst_residual.max(check.residual);
                if !(check.weight_error <= AGREEMENT_TOL) {
                    let d = fail(format!("relative weight error {:.3e}", check.weight_error));
                    report.failures.push(d);
                }
            }
            Err(e) => {
                let d = fail(e.to_string());
                report.failures.push(d);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_instances_pass_vacuously() {
        let report = run(VerifyConfig { count: 0, ..Default::default() }).unwrap();
        assert!(report.passed());
        assert!(report.to_string().contains("0 instances"));
    }

    #[test]
    fn rejects_degenerate_bounds() {
        let cfg = VerifyConfig { max_k: 1, ..Default::default() };
        assert!(matches!(run(cfg), Err(Error::Config(_))));
    }

    #[test]
    fn instances_are_reproducible() {
        let (m1, g1) = random_instance(42, 10, 10);
        let (m2, g2) = random_instance(42, 10, 10);
        assert_eq!(m1.sigma(), m2.sigma());
        assert_eq!(g1, g2);
        assert!(g1.alpha().iter().all(|&a| a > 0.1 && a <= 20.0));
    }

    #[test]
    fn small_run_agrees() {
        let report = run(VerifyConfig { count: 20, seed: 3, ..Default::default() }).unwrap();
        assert!(report.passed(), "{report}");
        let again = run(VerifyConfig { count: 20, seed: 3, ..Default::default() }).unwrap();
        assert_eq!(report.to_string(), again.to_string());
    }
}
