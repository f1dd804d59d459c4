//! Flat `key = value` configuration files.
//!
//! One entry per line; values use JSON syntax so vectors and matrices can be
//! written inline. Blank lines and lines starting with `#` are ignored.
//!
//! ```text
//! # market
//! mu    = [0.07, 0.14]
//! sigma = [[0.0144, 0.0048], [0.0048, 0.04]]
//! # investors
//! alpha = [2, 4]
//! beta  = [0.5, 0.5]
//! phi   = [3, 3]
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{InvestorGroup, MarketModel};

pub const MARKET_KEYS: [&str; 2] = ["mu", "sigma"];
pub const GROUP_KEYS: [&str; 3] = ["alpha", "beta", "phi"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValueConfig {
    entries: BTreeMap<String, Value>,
}

impl KeyValueConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = idx + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {lineno}: expected `key = value`")))?;
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::Config(format!("line {lineno}: invalid key {key:?}")));
            }
            let value: Value = serde_json::from_str(value.trim())
                .map_err(|e| Error::Config(format!("line {lineno}: {key}: {e}")))?;
            if entries.insert(key.to_string(), value).is_some() {
                return Err(Error::Config(format!("line {lineno}: duplicate key {key:?}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn insert(&mut self, key: &str, value: Value) {
        self.entries.insert(key.to_string(), value);
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rejects keys outside `allowed`, catching typos early.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::Config(format!(
                "unknown key {k:?} (expected one of {})",
                allowed.join(", ")
            ))),
            None => Ok(()),
        }
    }

    pub fn to_json(&self) -> Value {
        Value::Object(self.entries.clone().into_iter().collect())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.entries.get(key).map(|v| as_f64(key, v)).transpose()
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.entries
            .get(key)
            .map(|v| {
                v.as_u64()
                    .map(|u| u as usize)
                    .ok_or_else(|| Error::Config(format!("{key}: expected a non-negative integer")))
            })
            .transpose()
    }

    pub fn get_vector(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.entries.get(key).map(|v| as_vector(key, v)).transpose()
    }

    pub fn get_matrix(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
        self.entries
            .get(key)
            .map(|v| {
                v.as_array()
                    .ok_or_else(|| Error::Config(format!("{key}: expected an array of rows")))?
                    .iter()
                    .map(|row| as_vector(key, row))
                    .collect()
            })
            .transpose()
    }

    /// Two-element `[lo, hi]` interval.
    pub fn get_range(&self, key: &str) -> Result<Option<(f64, f64)>> {
        match self.get_vector(key)? {
            None => Ok(None),
            Some(v) if v.len() == 2 => Ok(Some((v[0], v[1]))),
            Some(_) => Err(Error::Config(format!("{key}: expected [lo, hi]"))),
        }
    }

    /// Market from `mu` and `sigma`, if either is present.
    pub fn market(&self) -> Result<Option<MarketModel>> {
        match (self.get_vector("mu")?, self.get_matrix("sigma")?) {
            (None, None) => Ok(None),
            (Some(mu), Some(sigma)) => MarketModel::from_rows(mu, sigma).map(Some),
            _ => Err(Error::Config("mu and sigma must be given together".into())),
        }
    }

    /// Investor group from `alpha`, `beta` and `phi`, if any is present.
    pub fn group(&self) -> Result<Option<InvestorGroup>> {
        let alpha = self.get_vector("alpha")?;
        let beta = self.get_vector("beta")?;
        let phi = self.get_vector("phi")?;
        match (alpha, beta, phi) {
            (None, None, None) => Ok(None),
            (Some(a), Some(b), Some(p)) => InvestorGroup::from_slices(&a, &b, &p).map(Some),
            _ => Err(Error::Config("alpha, beta and phi must be given together".into())),
        }
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::Config(format!("{key}: expected a number, got {v}")))
}

fn as_vector(key: &str, v: &Value) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| Error::Config(format!("{key}: expected an array of numbers")))?
        .iter()
        .map(|x| as_f64(key, x))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = "\
# market
mu    = [0.07, 0.14]
sigma = [[0.0144, 0.0048], [0.0048, 0.04]]

alpha = [2, 4]
beta  = [0.5, 0.5]
phi   = [3, 3]
";

    #[test]
    fn parses_reference_file() {
        let cfg = KeyValueConfig::parse(REFERENCE).unwrap();
        let m = cfg.market().unwrap().unwrap();
        assert_eq!(m.mu().as_slice(), &[0.07, 0.14]);
        let g = cfg.group().unwrap().unwrap();
        assert_eq!(g.alpha().as_slice(), &[2.0, 4.0]);
        assert!(cfg.check_keys(&["mu", "sigma", "alpha", "beta", "phi"]).is_ok());
        assert!(cfg.check_keys(&["mu", "sigma"]).is_err());
    }

    #[test]
    fn reports_bad_lines() {
        let err = KeyValueConfig::parse("mu [1, 2]").unwrap_err();
        assert!(err.to_string().contains("line 1"));
        let err = KeyValueConfig::parse("a = 1\n\nb = [1,\n").unwrap_err();
        assert!(err.to_string().contains("line 3"));
        let err = KeyValueConfig::parse("a = 1\na = 2\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn partial_market_is_an_error() {
        let cfg = KeyValueConfig::parse("mu = [0.1, 0.2]").unwrap();
        assert!(matches!(cfg.market(), Err(Error::Config(_))));
        let cfg = KeyValueConfig::parse("alpha = [1, 2]\nbeta = [0.5, 0.5]").unwrap();
        assert!(matches!(cfg.group(), Err(Error::Config(_))));
    }

    #[test]
    fn typed_getters() {
        let cfg = KeyValueConfig::parse("n = 101\nr = [0, 5]\nx = \"s\"").unwrap();
        assert_eq!(cfg.get_usize("n").unwrap(), Some(101));
        assert_eq!(cfg.get_range("r").unwrap(), Some((0.0, 5.0)));
        assert!(cfg.get_f64("x").is_err());
        assert_eq!(cfg.get_f64("missing").unwrap(), None);
    }
}
