//! Classical mean-variance solutions without mimicking: the global minimum
//! variance portfolio, the projection matrix `Q`, individual optima on the
//! efficient frontier and the wealth-weighted fund aggregate.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{InvestorGroup, MarketModel, COLUMN_SUM_TOL};

/// Expected return and variance of a portfolio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrontierPoint {
    pub mean: f64,
    pub variance: f64,
}

/// Quantities derived once from a market and reused by every solver.
///
/// `q` is `S^-1 - S^-1 1 1' S^-1 / (1' S^-1 1)`. It annihilates the unit
/// vector, which keeps every frontier portfolio on the budget hyperplane.
#[derive(Debug, Clone)]
pub struct MarkowitzContext {
    market: MarketModel,
    gmvp: DVector<f64>,
    q: DMatrix<f64>,
    q_mu: DVector<f64>,
    mu_gmv: f64,
    v_gmv: f64,
    slope: f64,
}

impl MarkowitzContext {
    pub fn new(market: &MarketModel) -> Result<Self> {
        let k = market.k();
        let chol = market.cholesky();
        let ones = DVector::from_element(k, 1.0);

        let inv_ones = chol.solve(&ones);
        let inv_mu = chol.solve(market.mu());
        let ones_inv_ones = ones.dot(&inv_ones);
        let ones_inv_mu = ones.dot(&inv_mu);
        if !(ones_inv_ones.is_finite() && ones_inv_ones > 0.0) {
            return Err(Error::NumericalBreakdown(format!(
                "1' S^-1 1 = {ones_inv_ones}"
            )));
        }

        let gmvp = &inv_ones / ones_inv_ones;
        let sigma_inv = chol.inverse();
        let q = &sigma_inv - (&inv_ones * inv_ones.transpose()) / ones_inv_ones;
        let q = (&q + q.transpose()) * 0.5;
        let q_mu = &inv_mu - &inv_ones * (ones_inv_mu / ones_inv_ones);
        let slope = market.mu().dot(&q_mu).max(0.0);

        Ok(Self {
            market: market.clone(),
            gmvp,
            q,
            q_mu,
            mu_gmv: ones_inv_mu / ones_inv_ones,
            v_gmv: 1.0 / ones_inv_ones,
            slope,
        })
    }

    pub fn market(&self) -> &MarketModel {
        &self.market
    }

    /// Global minimum variance portfolio weights.
    pub fn gmvp(&self) -> &DVector<f64> {
        &self.gmvp
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Direction `Q mu` along which risk tolerance moves a frontier portfolio.
    pub fn q_mu(&self) -> &DVector<f64> {
        &self.q_mu
    }

    pub fn mu_gmv(&self) -> f64 {
        self.mu_gmv
    }

    pub fn v_gmv(&self) -> f64 {
        self.v_gmv
    }

    /// `mu' Q mu`
    pub fn slope(&self) -> f64 {
        self.slope
    }

    /// Frontier portfolio `gmvp + t Q mu` for risk tolerance `t`.
    pub fn frontier_weights(&self, tolerance: f64) -> DVector<f64> {
        &self.gmvp + &self.q_mu * tolerance
    }

    pub fn frontier_point(&self, tolerance: f64) -> FrontierPoint {
        FrontierPoint {
            mean: self.mu_gmv + tolerance * self.slope,
            variance: self.v_gmv + tolerance * tolerance * self.slope,
        }
    }
}

/// Fund portfolio of a non-mimicking group.
#[derive(Debug, Clone)]
pub struct FundPortfolio {
    pub weights: DVector<f64>,
    pub alpha_f: f64,
    pub point: FrontierPoint,
}

/// Optimal weights of a single mean-variance investor with risk aversion
/// `alpha`.
pub fn individual_weights(
    ctx: &MarkowitzContext,
    alpha: f64,
) -> Result<(DVector<f64>, FrontierPoint)> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::NonPositiveAlpha { index: 0, value: alpha });
    }
    let t = alpha.recip();
    Ok((ctx.frontier_weights(t), ctx.frontier_point(t)))
}

/// Matrix whose column `i` is investor `i`'s individual optimum.
pub fn individual_weight_matrix(ctx: &MarkowitzContext, group: &InvestorGroup) -> DMatrix<f64> {
    let k = ctx.gmvp.len();
    let mut w = DMatrix::zeros(k, group.n());
    for (i, &alpha) in group.alpha().iter().enumerate() {
        w.set_column(i, &ctx.frontier_weights(alpha.recip()));
    }
    w
}

/// Aggregate risk aversion `(sum_i beta_i / alpha_i)^-1` of a fund pooling
/// non-mimicking investors.
pub fn aggregate_risk_aversion(group: &InvestorGroup) -> f64 {
    group
        .beta()
        .iter()
        .zip(group.alpha().iter())
        .map(|(b, a)| b / a)
        .sum::<f64>()
        .recip()
}

pub fn fund_aggregate(ctx: &MarkowitzContext, group: &InvestorGroup) -> FundPortfolio {
    let alpha_f = aggregate_risk_aversion(group);
    let t = alpha_f.recip();
    FundPortfolio {
        weights: ctx.frontier_weights(t),
        alpha_f,
        point: ctx.frontier_point(t),
    }
}

/// Mean-variance utility `w' mu - (alpha / 2) w' S w`.
pub fn mv_utility(market: &MarketModel, weights: &DVector<f64>, alpha: f64) -> Result<f64> {
    if weights.len() != market.k() {
        return Err(Error::DimensionMismatch {
            what: "weights",
            expected: market.k(),
            got: weights.len(),
        });
    }
    let sum = weights.sum();
    if (sum - 1.0).abs() > COLUMN_SUM_TOL {
        return Err(Error::ConstraintViolated { column: 0, sum });
    }
    let variance = weights.dot(&(market.sigma() * weights));
    Ok(weights.dot(market.mu()) - 0.5 * alpha * variance)
}
