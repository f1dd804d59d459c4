//! Independent check of the closed-form optimum.
//!
//! The pooled problem is rewritten over `x = vec(W')` (asset-major, so entry
//! `j * n + i` is asset `j` held by investor `i`) and handed to a dense LU
//! solve of the equality-constrained KKT system
//!
//! ```text
//! [ S (x) A_phi    1_k (x) I_n ] [ x ]   [ (mu (x) I_n) beta ]
//! [ 1_k' (x) I_n   0           ] [ v ] = [ 1_n               ]
//! ```
//!
//! Nothing here touches the closed-form solver or the Markowitz context;
//! the mimicking matrix is rebuilt from its scalar entries.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::markowitz::MarkowitzContext;
use crate::mimicking::mimicking_matrix;
use crate::model::{InvestorGroup, MarketModel, PortfolioMatrix};

pub const DEFAULT_MAX_UNKNOWNS: usize = 5000;
/// Scaled KKT residual bound a returned solution must satisfy.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
pub struct KktOptions {
    pub max_unknowns: usize,
}

impl Default for KktOptions {
    fn default() -> Self {
        Self {
            max_unknowns: DEFAULT_MAX_UNKNOWNS,
        }
    }
}

/// Raw data of one pooled problem. Unlike [`InvestorGroup`], this admits a
/// single investor, which reduces to the individual Markowitz problem.
#[derive(Debug, Clone)]
pub struct KktProblem {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub a_phi: DMatrix<f64>,
    pub beta: DVector<f64>,
}

impl KktProblem {
    pub fn from_inputs(market: &MarketModel, group: &InvestorGroup) -> Self {
        let (alpha, beta, phi) = (group.alpha(), group.beta(), group.phi());
        let phi_bar: f64 = beta.iter().zip(phi.iter()).map(|(b, p)| b * p).sum();
        let a = DMatrix::from_fn(group.n(), group.n(), |i, j| {
            if i == j {
                beta[i] * (alpha[i] + phi[i]) + beta[i] * beta[i] * (phi_bar - 2.0 * phi[i])
            } else {
                beta[i] * beta[j] * (phi_bar - 2.0 * phi[i])
            }
        });
        Self {
            mu: market.mu().clone(),
            sigma: market.sigma().clone(),
            a_phi: (&a + a.transpose()) * 0.5,
            beta: beta.clone(),
        }
    }

    pub fn k(&self) -> usize {
        self.mu.len()
    }

    pub fn n(&self) -> usize {
        self.beta.len()
    }

    pub fn unknowns(&self) -> usize {
        self.k() * self.n() + self.n()
    }

    /// KKT matrix and right-hand side.
    pub fn assemble(&self) -> (DMatrix<f64>, DVector<f64>) {
        let (k, n) = (self.k(), self.n());
        let kn = k * n;
        let size = kn + n;

        let mut kkt = DMatrix::zeros(size, size);
        kkt.view_mut((0, 0), (kn, kn))
            .copy_from(&self.sigma.kronecker(&self.a_phi));
        for j in 0..k {
            for i in 0..n {
                kkt[(j * n + i, kn + i)] = 1.0;
                kkt[(kn + i, j * n + i)] = 1.0;
            }
        }

        let mut rhs = DVector::zeros(size);
        for j in 0..k {
            for i in 0..n {
                rhs[j * n + i] = self.mu[j] * self.beta[i];
            }
        }
        rhs.rows_mut(kn, n).fill(1.0);
        (kkt, rhs)
    }

    pub fn solve(&self, options: KktOptions) -> Result<OracleSolution> {
        let unknowns = self.unknowns();
        if unknowns > options.max_unknowns {
            return Err(Error::SizeCapExceeded {
                unknowns,
                cap: options.max_unknowns,
            });
        }
        let (kkt, rhs) = self.assemble();
        let lu = kkt.clone().lu();
        let mut x = lu.solve(&rhs).ok_or(Error::SingularKkt)?;
        // one step of iterative refinement
        let r = &rhs - &kkt * &x;
        if let Some(dx) = lu.solve(&r) {
            x += dx;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularKkt);
        }

        let residual = (&kkt * &x - &rhs).amax() / (1.0 + rhs.amax());
        if residual > RESIDUAL_TOL {
            return Err(Error::NumericalBreakdown(format!(
                "KKT residual {residual:e} exceeds {RESIDUAL_TOL:e}"
            )));
        }

        let (k, n) = (self.k(), self.n());
        let w = DMatrix::from_fn(k, n, |j, i| x[j * n + i]);
        // The system carries the multiplier with the opposite sign to the
        // closed form `(A_phi 1 - beta 1' S^-1 mu) / (1' S^-1 1)`.
        let lambda = -x.rows(k * n, n).into_owned();
        Ok(OracleSolution {
            w: PortfolioMatrix::new(w)?,
            lambda,
            residual,
        })
    }
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub w: PortfolioMatrix,
    pub lambda: DVector<f64>,
    /// `max |K x - b| / (1 + max |b|)`
    pub residual: f64,
}

pub fn kkt_solve(market: &MarketModel, group: &InvestorGroup) -> Result<OracleSolution> {
    kkt_solve_with(market, group, KktOptions::default())
}

pub fn kkt_solve_with(
    market: &MarketModel,
    group: &InvestorGroup,
    options: KktOptions,
) -> Result<OracleSolution> {
    KktProblem::from_inputs(market, group).solve(options)
}

/// Closed-form multipliers `(A_phi 1 - beta 1' S^-1 mu) / (1' S^-1 1)`.
pub fn lambda_closed_form(ctx: &MarkowitzContext, group: &InvestorGroup) -> Result<DVector<f64>> {
    let mm = mimicking_matrix(group)?;
    let row_sums = mm.a_phi() * DVector::from_element(group.n(), 1.0);
    // 1' S^-1 1 = 1 / v_gmv and 1' S^-1 mu = mu_gmv / v_gmv
    Ok(row_sums * ctx.v_gmv() - group.beta() * ctx.mu_gmv())
}
