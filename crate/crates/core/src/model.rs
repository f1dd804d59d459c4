//! Validated inputs shared by every solver: the asset market, the investor
//! group and the portfolio weight matrix.
//!
//! Construction either yields a value satisfying all invariants or a typed
//! [`Error`]; there is no way to observe a partially validated value.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative tolerance on `|sigma_ij - sigma_ji|`, scaled by `max |sigma|`.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Absolute tolerance on `|sum(beta) - 1|`.
pub const BETA_SUM_TOL: f64 = 1e-12;
/// Absolute tolerance on the unit column sums of a portfolio matrix.
pub const COLUMN_SUM_TOL: f64 = 1e-10;

/// Cholesky factorization that also rejects numerically singular matrices.
///
/// nalgebra only fails on a non-positive pivot; a pivot that survives purely
/// through rounding (e.g. an exactly rank-deficient sample covariance) is
/// treated as a failure too. Every pivot `l_ii^2` must exceed
/// `16 n eps max_j a_jj`.
pub(crate) fn checked_cholesky(
    matrix: &DMatrix<f64>,
    what: &'static str,
) -> Result<Cholesky<f64, Dyn>> {
    let chol = Cholesky::new(matrix.clone()).ok_or(Error::NotPositiveDefinite { what })?;
    let n = matrix.nrows();
    let threshold = 16.0 * n as f64 * f64::EPSILON * matrix.diagonal().max();
    let l = chol.l_dirty();
    for i in 0..n {
        let pivot = l[(i, i)] * l[(i, i)];
        if !(pivot > threshold) {
            return Err(Error::NotPositiveDefinite { what });
        }
    }
    Ok(chol)
}

fn check_finite<'a>(values: impl IntoIterator<Item = &'a f64>, what: &'static str) -> Result<()> {
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what })
    }
}

/// Expected returns and covariance of `k` risky assets.
#[derive(Debug, Clone)]
pub struct MarketModel {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl MarketModel {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let k = mu.len();
        if sigma.nrows() != k {
            return Err(Error::DimensionMismatch {
                what: "sigma rows",
                expected: k,
                got: sigma.nrows(),
            });
        }
        if sigma.ncols() != k {
            return Err(Error::DimensionMismatch {
                what: "sigma columns",
                expected: k,
                got: sigma.ncols(),
            });
        }
        if k < 2 {
            return Err(Error::TooFewAssets(k));
        }
        check_finite(mu.iter(), "mu")?;
        check_finite(sigma.iter(), "sigma")?;

        let scale = sigma.amax();
        let max_asymmetry = (&sigma - sigma.transpose()).amax();
        if max_asymmetry > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric { max_asymmetry });
        }
        let chol = checked_cholesky(&sigma, "covariance matrix")?;
        Ok(Self { mu, sigma, chol })
    }

    /// Builds a market from plain vectors; `sigma` is given row by row.
    pub fn from_rows(mu: Vec<f64>, sigma: Vec<Vec<f64>>) -> Result<Self> {
        let k = mu.len();
        if sigma.len() != k {
            return Err(Error::DimensionMismatch {
                what: "sigma rows",
                expected: k,
                got: sigma.len(),
            });
        }
        if let Some(row) = sigma.iter().find(|row| row.len() != k) {
            return Err(Error::DimensionMismatch {
                what: "sigma columns",
                expected: k,
                got: row.len(),
            });
        }
        let sigma = DMatrix::from_fn(k, k, |i, j| sigma[i][j]);
        Self::new(DVector::from_vec(mu), sigma)
    }

    pub fn k(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    /// Re-runs every constructor check on the stored values.
    pub fn revalidate(&self) -> Result<()> {
        Self::new(self.mu.clone(), self.sigma.clone()).map(|_| ())
    }
}

/// Risk aversions, wealth shares and mimicking coefficients of `n` investors.
#[derive(Debug, Clone, PartialEq)]
pub struct InvestorGroup {
    alpha: DVector<f64>,
    beta: DVector<f64>,
    phi: DVector<f64>,
}

impl InvestorGroup {
    pub fn new(alpha: DVector<f64>, beta: DVector<f64>, phi: DVector<f64>) -> Result<Self> {
        let n = alpha.len();
        for (what, len) in [("beta", beta.len()), ("phi", phi.len())] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    got: len,
                });
            }
        }
        if n < 2 {
            return Err(Error::TooFewInvestors(n));
        }
        check_finite(alpha.iter(), "alpha")?;
        check_finite(beta.iter(), "beta")?;
        check_finite(phi.iter(), "phi")?;

        if let Some((index, &value)) = alpha.iter().enumerate().find(|(_, &a)| a <= 0.0) {
            return Err(Error::NonPositiveAlpha { index, value });
        }
        if let Some((index, &value)) = beta.iter().enumerate().find(|(_, &b)| b <= 0.0) {
            return Err(Error::NonPositiveBeta { index, value });
        }
        let sum = beta.sum();
        if (sum - 1.0).abs() > BETA_SUM_TOL {
            return Err(Error::BetaNotNormalized { sum });
        }
        if let Some((index, &value)) = phi.iter().enumerate().find(|(_, &p)| p < 0.0) {
            return Err(Error::NegativePhi { index, value });
        }
        Ok(Self { alpha, beta, phi })
    }

    pub fn from_slices(alpha: &[f64], beta: &[f64], phi: &[f64]) -> Result<Self> {
        Self::new(
            DVector::from_column_slice(alpha),
            DVector::from_column_slice(beta),
            DVector::from_column_slice(phi),
        )
    }

    /// Group in which every investor holds the same share `1/n` of wealth.
    pub fn equal_wealth(alpha: &[f64], phi: &[f64]) -> Result<Self> {
        let n = alpha.len();
        let beta = vec![1.0 / n as f64; n];
        Self::from_slices(alpha, &beta, phi)
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn phi(&self) -> &DVector<f64> {
        &self.phi
    }

    /// Wealth-weighted mean mimicking coefficient `beta' phi`.
    pub fn phi_bar(&self) -> f64 {
        self.beta.dot(&self.phi)
    }

    /// Wealth-weighted mean risk aversion `beta' alpha`.
    pub fn alpha_bar(&self) -> f64 {
        self.beta.dot(&self.alpha)
    }

    /// `diag(alpha)`
    pub fn risk_aversion_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.alpha)
    }

    /// `diag(beta)`
    pub fn wealth_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.beta)
    }

    /// `diag(phi)`
    pub fn mimicking_coefficients_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.phi)
    }

    pub fn revalidate(&self) -> Result<()> {
        Self::new(self.alpha.clone(), self.beta.clone(), self.phi.clone()).map(|_| ())
    }
}

/// `k x n` matrix whose column `i` holds investor `i`'s portfolio weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioMatrix(DMatrix<f64>);

impl PortfolioMatrix {
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        check_finite(weights.iter(), "portfolio weights")?;
        for (column, col) in weights.column_iter().enumerate() {
            let sum = col.sum();
            if (sum - 1.0).abs() > COLUMN_SUM_TOL {
                return Err(Error::ConstraintViolated { column, sum });
            }
        }
        Ok(Self(weights))
    }

    /// Matrix with every column equal to `weights`.
    pub fn repeated(weights: &DVector<f64>, n: usize) -> Result<Self> {
        Self::new(DMatrix::from_fn(weights.len(), n, |i, _| weights[i]))
    }

    pub fn k(&self) -> usize {
        self.0.nrows()
    }

    pub fn n(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn column(&self, i: usize) -> DVector<f64> {
        self.0.column(i).into_owned()
    }

    /// Aggregate fund weights `W beta`.
    pub fn fund_weights(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.0 * beta
    }
}
