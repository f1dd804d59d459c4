//! Closed-form mean-variance portfolios for groups of investors who want to
//! stay close to what their peers hold, pooled into a fund that knows every
//! member's preferences.
//!
//! - [`model`]: validated market, investor group and weight matrix types.
//! - [`markowitz`]: classical frontier solutions and fund aggregation.
//! - [`mimicking`]: the mimicking matrix and the optimal weights under it.
//! - [`oracle`]: a dense KKT solve of the same problem, used for checking.
//! - [`moments`]: CSV return ingestion and sample moments.
//! - [`study`]: weight-shift and utility-gain sweeps.
//! - [`verify`]: seeded closed-form versus oracle comparisons.
//! - [`cli`]: the `mimic` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod markowitz;
pub mod mimicking;
pub mod model;
pub mod moments;
pub mod oracle;
pub mod study;
pub mod verify;

pub use error::{Error, ErrorKind, Result};
pub use markowitz::{FrontierPoint, FundPortfolio, MarkowitzContext};
pub use mimicking::{MimickingMatrix, MimickingSolution};
pub use model::{InvestorGroup, MarketModel, PortfolioMatrix};
pub use oracle::OracleSolution;
pub use study::{StudyConfig, SweepRecord, SweepTable};
