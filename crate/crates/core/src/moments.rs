//! Loading return histories from CSV and estimating sample moments.

use std::fs::File;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::MarketModel;

/// `T x k` simple returns, one row per period in chronological order.
#[derive(Debug, Clone)]
pub struct ReturnSample {
    returns: DMatrix<f64>,
    asset_names: Vec<String>,
}

impl ReturnSample {
    pub fn new(asset_names: Vec<String>, returns: DMatrix<f64>) -> Result<Self> {
        let k = asset_names.len();
        if returns.ncols() != k {
            return Err(Error::DimensionMismatch {
                what: "return columns",
                expected: k,
                got: returns.ncols(),
            });
        }
        for (column, col) in returns.column_iter().enumerate() {
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue {
                    row: row + 1,
                    column: column + 1,
                });
            }
        }
        let required = k + 2;
        if returns.nrows() < required {
            return Err(Error::TooFewObservations {
                got: returns.nrows(),
                required,
                assets: k,
            });
        }
        Ok(Self {
            returns,
            asset_names,
        })
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn asset_names(&self) -> &[String] {
        &self.asset_names
    }

    pub fn t(&self) -> usize {
        self.returns.nrows()
    }

    pub fn k(&self) -> usize {
        self.returns.ncols()
    }
}

/// Reads a header row of asset names followed by one row of returns per
/// period. Row numbers in errors count data rows from 1, excluding the header.
pub fn load_csv(path: impl AsRef<Path>) -> Result<ReturnSample> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);

    let header_err = |e: csv::Error| Error::Parse {
        row: 0,
        column: 0,
        message: e.to_string(),
    };
    let names: Vec<String> = reader
        .headers()
        .map_err(header_err)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if names.iter().all(|n| n.is_empty()) {
        return Err(Error::Parse {
            row: 0,
            column: 0,
            message: "missing header row".into(),
        });
    }
    let k = names.len();

    let mut values = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
            _ => Error::Parse {
                row,
                column: 0,
                message: e.to_string(),
            },
        })?;
        if record.len() != k {
            return Err(Error::Parse {
                row,
                column: record.len().min(k) + 1,
                message: format!("expected {k} fields, found {}", record.len()),
            });
        }
        for (c, field) in record.iter().enumerate() {
            let column = c + 1;
            let field = field.trim();
            if field.is_empty() {
                return Err(Error::Parse {
                    row,
                    column,
                    message: "empty cell".into(),
                });
            }
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                column,
                message: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { row, column });
            }
            values.push(v);
        }
    }
    let t = values.len() / k.max(1);
    ReturnSample::new(names, DMatrix::from_row_slice(t, k, &values))
}

/// Column means and the unbiased (`T - 1` divisor) sample covariance.
pub fn sample_moments(returns: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let (t, k) = returns.shape();
    let mean = DVector::from_fn(k, |j, _| returns.column(j).mean());
    let mut cov = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let s: f64 = (0..t)
                .map(|r| (returns[(r, a)] - mean[a]) * (returns[(r, b)] - mean[b]))
                .sum();
            let v = s / (t as f64 - 1.0);
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    (mean, cov)
}

/// Estimates `(mu, S)`; with `periods_per_year = Some(P)` both moments are
/// scaled by `P`.
pub fn estimate(sample: &ReturnSample, periods_per_year: Option<u32>) -> Result<MarketModel> {
    let (mut mu, mut sigma) = sample_moments(sample.returns());
    if let Some(p) = periods_per_year {
        if p == 0 {
            return Err(Error::Config("periods per year must be positive".into()));
        }
        mu *= p as f64;
        sigma *= p as f64;
    }
    MarketModel::new(mu, sigma)
}
