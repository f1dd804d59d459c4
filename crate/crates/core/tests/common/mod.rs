//! Reference computations for tests, kept independent of the closed forms.
#![allow(dead_code)]

use mimic_core::oracle::{KktOptions, KktProblem};
use mimic_core::{InvestorGroup, MarketModel, PortfolioMatrix};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn reference_market() -> MarketModel {
    MarketModel::from_rows(
        vec![0.07, 0.14],
        vec![vec![0.0144, 0.0048], vec![0.0048, 0.04]],
    )
    .unwrap()
}

/// Pooled penalized utility as the explicit per-investor sum.
pub fn direct_penalized_sum(m: &MarketModel, g: &InvestorGroup, w: &DMatrix<f64>) -> f64 {
    let fund = w * g.beta();
    let sigma = m.sigma();
    (0..g.n())
        .map(|i| {
            let wi = w.column(i).into_owned();
            let gap = &wi - &fund;
            g.beta()[i]
                * (wi.dot(m.mu())
                    - 0.5 * g.alpha()[i] * wi.dot(&(sigma * &wi))
                    - 0.5 * g.phi()[i] * gap.dot(&(sigma * &gap)))
        })
        .sum()
}

/// Single investor optimum by the KKT system with `n = 1`.
pub fn single_investor_kkt(m: &MarketModel, alpha: f64) -> DVector<f64> {
    let p = KktProblem {
        mu: m.mu().clone(),
        sigma: m.sigma().clone(),
        a_phi: DMatrix::from_element(1, 1, alpha),
        beta: DVector::from_element(1, 1.0),
    };
    p.solve(KktOptions::default()).unwrap().w.column(0)
}

/// Minimum-variance portfolio by the KKT system with zero means.
pub fn min_variance_kkt(m: &MarketModel) -> DVector<f64> {
    let p = KktProblem {
        mu: DVector::zeros(m.k()),
        sigma: m.sigma().clone(),
        a_phi: DMatrix::from_element(1, 1, 1.0),
        beta: DVector::from_element(1, 1.0),
    };
    p.solve(KktOptions::default()).unwrap().w.column(0)
}

/// `w` plus a random perturbation whose columns sum to zero.
pub fn feasible_perturbation<R: Rng>(rng: &mut R, w: &PortfolioMatrix, scale: f64) -> PortfolioMatrix {
    let (k, n) = (w.k(), w.n());
    let mut d = DMatrix::from_fn(k, n, |_, _| rng.gen_range(-scale..scale));
    for mut col in d.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    PortfolioMatrix::new(w.as_matrix() + d).unwrap()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
