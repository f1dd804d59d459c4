use std::path::PathBuf;

use thiserror::Error;

/// Broad failure classes; the CLI maps each one to a fixed exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("at least 2 assets are required, got {0}")]
    TooFewAssets(usize),
    #[error("at least 2 investors are required, got {0}")]
    TooFewInvestors(usize),
    #[error("covariance matrix is not symmetric (max asymmetry {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },
    #[error("{what} is not positive definite (Cholesky factorization failed)")]
    NotPositiveDefinite { what: &'static str },
    #[error("alpha[{index}] must be positive, got {value}")]
    NonPositiveAlpha { index: usize, value: f64 },
    #[error("beta[{index}] must be positive, got {value}")]
    NonPositiveBeta { index: usize, value: f64 },
    #[error("beta must sum to 1, got {sum}")]
    BetaNotNormalized { sum: f64 },
    #[error("phi[{index}] must be non-negative, got {value}")]
    NegativePhi { index: usize, value: f64 },
    #[error("{what} contains a non-finite value")]
    NonFinite { what: &'static str },
    #[error("weights in column {column} sum to {sum}, not 1")]
    ConstraintViolated { column: usize, sum: f64 },
    #[error("beta is not uniform: beta[{index}] = {value}, expected 1/n")]
    NotUniformWealth { index: usize, value: f64 },
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("KKT system is singular")]
    SingularKkt,
    #[error("KKT system has {unknowns} unknowns, cap is {cap}")]
    SizeCapExceeded { unknowns: usize, cap: usize },
    #[error("optimal penalized utility {0} is not positive; relative gain undefined")]
    NonPositiveOptimum(f64),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },
    #[error("need at least {required} observations for {assets} assets, got {got}")]
    TooFewObservations {
        got: usize,
        required: usize,
        assets: usize,
    },
    #[error("non-finite value at row {row}, column {column}")]
    NonFiniteValue { row: usize, column: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("grid point {series} at {coordinate}: {source}")]
    GridPoint {
        series: String,
        coordinate: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::NumericalBreakdown(_)
            | Error::SingularKkt
            | Error::SizeCapExceeded { .. }
            | Error::NonPositiveOptimum(_) => ErrorKind::Numerical,
            Error::GridPoint { source, .. } => source.kind(),
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
