//! Optimal portfolios for investors who penalize the `S`-weighted distance
//! between their own holdings and the pooled fund.
//!
//! The pooled objective `sum_i beta_i EU*_i` collapses to the trace form
//! `beta' W' mu - tr(A W' S W) / 2` with the `n x n` mimicking matrix
//!
//! ```text
//! A = (A0 + Phi) B + (phi_bar I - 2 Phi) beta beta'
//! ```
//!
//! where `A0 = diag(alpha)`, `B = diag(beta)`, `Phi = diag(phi)` and
//! `phi_bar = beta' phi`. Only the symmetric part `A_phi = (A + A') / 2`
//! enters the optimum
//!
//! ```text
//! W* = gmvp 1_n' + Q mu (A_phi^-1 beta)'
//! ```
//!
//! so every investor still holds a frontier portfolio and mimicking changes
//! nothing but the fund's aggregate risk aversion `(beta' A_phi^-1 beta)^-1`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::markowitz::{aggregate_risk_aversion, FrontierPoint, MarkowitzContext};
use crate::model::{checked_cholesky, InvestorGroup, MarketModel, PortfolioMatrix, BETA_SUM_TOL};

/// The mimicking matrix `A`, its symmetric part and `phi_bar`.
#[derive(Debug, Clone)]
pub struct MimickingMatrix {
    a: DMatrix<f64>,
    a_phi: DMatrix<f64>,
    phi_bar: f64,
    chol: Cholesky<f64, Dyn>,
}

impl MimickingMatrix {
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn a_phi(&self) -> &DMatrix<f64> {
        &self.a_phi
    }

    pub fn phi_bar(&self) -> f64 {
        self.phi_bar
    }

    /// `A_phi^-1 v` via the Cholesky factor.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(v)
    }
}

pub fn mimicking_matrix(group: &InvestorGroup) -> Result<MimickingMatrix> {
    let n = group.n();
    let beta = group.beta();
    let phi_bar = group.phi_bar();
    let phi = group.mimicking_coefficients_matrix();

    let own = (group.risk_aversion_matrix() + &phi) * group.wealth_matrix();
    let shift = DMatrix::identity(n, n) * phi_bar - phi * 2.0;
    let a = own + shift * (beta * beta.transpose());
    let a_phi = (&a + a.transpose()) * 0.5;
    let chol = checked_cholesky(&a_phi, "mimicking matrix A_phi")?;
    Ok(MimickingMatrix {
        a,
        a_phi,
        phi_bar,
        chol,
    })
}

/// Optimum of the pooled problem with mimicking.
#[derive(Debug, Clone)]
pub struct MimickingSolution {
    /// Per-investor optimal weights, one column each.
    pub w_star: PortfolioMatrix,
    /// `A_phi^-1 beta`: investor `i` holds `gmvp + shares[i] * Q mu`.
    pub shares: DVector<f64>,
    pub fund_weights: DVector<f64>,
    pub alpha_star_f: f64,
    pub point: FrontierPoint,
    pub eu_star: f64,
}

pub fn solve(ctx: &MarkowitzContext, group: &InvestorGroup) -> Result<MimickingSolution> {
    let k = ctx.gmvp().len();
    let mm = mimicking_matrix(group)?;
    let shares = mm.solve(group.beta());
    let inv_alpha = group.beta().dot(&shares);
    if !(inv_alpha.is_finite() && inv_alpha > 0.0) {
        return Err(Error::NumericalBreakdown(format!(
            "beta' A_phi^-1 beta = {inv_alpha}"
        )));
    }

    let w = DMatrix::from_fn(k, group.n(), |row, col| {
        ctx.gmvp()[row] + ctx.q_mu()[row] * shares[col]
    });
    let w_star = PortfolioMatrix::new(w)?;
    let eu_star = utility_with(ctx.market(), group.beta(), mm.a_phi(), &w_star);

    Ok(MimickingSolution {
        fund_weights: ctx.frontier_weights(inv_alpha),
        alpha_star_f: inv_alpha.recip(),
        point: ctx.frontier_point(inv_alpha),
        eu_star,
        shares,
        w_star,
    })
}

fn utility_with(
    market: &MarketModel,
    beta: &DVector<f64>,
    a_phi: &DMatrix<f64>,
    w: &PortfolioMatrix,
) -> f64 {
    let w = w.as_matrix();
    let expected = beta.dot(&(w.transpose() * market.mu()));
    let cross = w.transpose() * market.sigma() * w;
    // tr(A X) for symmetric A and X is the entrywise inner product.
    expected - 0.5 * a_phi.dot(&cross)
}

/// Pooled penalized utility `beta' W' mu - tr(A_phi W' S W) / 2`.
pub fn penalized_utility(
    market: &MarketModel,
    group: &InvestorGroup,
    w: &PortfolioMatrix,
) -> Result<f64> {
    if w.k() != market.k() {
        return Err(Error::DimensionMismatch {
            what: "portfolio rows",
            expected: market.k(),
            got: w.k(),
        });
    }
    if w.n() != group.n() {
        return Err(Error::DimensionMismatch {
            what: "portfolio columns",
            expected: group.n(),
            got: w.n(),
        });
    }
    let mm = mimicking_matrix(group)?;
    Ok(utility_with(market, group.beta(), mm.a_phi(), w))
}

fn check_uniform_wealth(group: &InvestorGroup) -> Result<()> {
    let share = 1.0 / group.n() as f64;
    match group
        .beta()
        .iter()
        .enumerate()
        .find(|(_, &b)| (b - share).abs() > BETA_SUM_TOL)
    {
        Some((index, &value)) => Err(Error::NotUniformWealth { index, value }),
        None => Ok(()),
    }
}

/// Equal-wealth form `n (A0 + Phi) + (phi_bar I - 2 Phi) 1 1'`.
///
/// This is `n^2` times the general mimicking matrix when every `beta_i = 1/n`,
/// so `1' A_cor_phi^-1 1` reproduces `beta' A_phi^-1 beta`.
pub fn corollary_matrix_equal_wealth(group: &InvestorGroup) -> Result<DMatrix<f64>> {
    check_uniform_wealth(group)?;
    let n = group.n();
    let phi = group.mimicking_coefficients_matrix();
    let own = (group.risk_aversion_matrix() + &phi) * n as f64;
    let shift = DMatrix::identity(n, n) * group.phi_bar() - phi * 2.0;
    Ok(own + shift * DMatrix::from_element(n, n, 1.0))
}

/// Fund weights `gmvp + (1' A_cor_phi^-1 1) Q mu` for an equal-wealth group.
pub fn equal_wealth_fund_weights(
    ctx: &MarkowitzContext,
    group: &InvestorGroup,
) -> Result<DVector<f64>> {
    let a = corollary_matrix_equal_wealth(group)?;
    let a_phi = (&a + a.transpose()) * 0.5;
    let chol = checked_cholesky(&a_phi, "equal-wealth mimicking matrix")?;
    let ones = DVector::from_element(group.n(), 1.0);
    let t = ones.dot(&chol.solve(&ones));
    Ok(ctx.frontier_weights(t))
}

/// Many-small-investors approximation of the aggregate risk aversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticAlpha {
    /// `sum_i beta_i / (alpha_i + phi_i)`, the limit of `beta' A_phi^-1 beta`.
    pub limit_inverse: f64,
    /// `alpha_bar + phi_bar`, an upper bound on `1 / limit_inverse`.
    pub upper: f64,
    /// Non-mimicking aggregate risk aversion.
    pub classical: f64,
}

pub fn asymptotic_alpha(group: &InvestorGroup) -> AsymptoticAlpha {
    let limit_inverse = group
        .beta()
        .iter()
        .zip(group.alpha().iter().zip(group.phi().iter()))
        .map(|(b, (a, p))| b / (a + p))
        .sum();
    AsymptoticAlpha {
        limit_inverse,
        upper: group.alpha_bar() + group.phi_bar(),
        classical: aggregate_risk_aversion(group),
    }
}
