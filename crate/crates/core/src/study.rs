//! Two-asset, two-investor sweeps of the weight shift and relative utility
//! gain from pooling mimicking investors into a preference-aware fund.
//!
//! Figure 1 fixes `phi` and sweeps the risk-aversion ratio `a = alpha2 /
//! alpha1`; figure 2 fixes `a` and sweeps `phi`. Both investors hold half of
//! the wealth.

use std::io::Write;


use crate::config::KeyValueConfig;
use crate::error::{Error, Result};
use crate::markowitz::{fund_aggregate, individual_weight_matrix, MarkowitzContext};
use crate::mimicking::{penalized_utility, solve};
use crate::model::{InvestorGroup, MarketModel, PortfolioMatrix};

pub const CSV_HEADER: &str = "series,coordinate,delta_omega,delta_eu";
pub const CSV_DIGITS: usize = 15;

pub const STUDY_KEYS: [&str; 10] = [
    "mu",
    "sigma",
    "alpha1",
    "phi_set",
    "a_set",
    "a_range",
    "phi_range",
    "grid_points",
    "phi2_ratio",
    "beta",
];

/// Two assets with means 7% and 14%, volatilities 12% and 20% and
/// correlation 0.2.
pub fn reference_market() -> MarketModel {
    let (s1, s2, rho) = (0.12, 0.2, 0.2);
    MarketModel::from_rows(
        vec![0.07, 0.14],
        vec![vec![s1 * s1, rho * s1 * s2], vec![rho * s1 * s2, s2 * s2]],
    )
    .expect("reference market is valid")
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub market: MarketModel,
    pub alpha1: f64,
    /// Mimicking coefficients, one figure-1 series each.
    pub phi_set: Vec<f64>,
    /// Risk-aversion ratios, one figure-2 series each.
    pub a_set: Vec<f64>,
    pub a_range: (f64, f64),
    pub phi_range: (f64, f64),
    pub grid_points: usize,
    /// `phi2 = phi2_ratio * phi1`; 1 gives equal mimicking coefficients.
    pub phi2_ratio: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            market: reference_market(),
            alpha1: 2.0,
            phi_set: vec![3.0, 5.0, 10.0],
            a_set: vec![2.0, 5.0, 10.0],
            a_range: (1.0, 10.0),
            phi_range: (0.0, 5.0),
            grid_points: 101,
            phi2_ratio: 1.0,
        }
    }
}

impl StudyConfig {
    /// Defaults overridden by any keys present in `cfg`.
    pub fn from_config(cfg: &KeyValueConfig) -> Result<Self> {
        cfg.check_keys(&STUDY_KEYS)?;
        let mut out = Self::default();
        if let Some(m) = cfg.market()? {
            if m.k() != 2 {
                return Err(Error::Config("the study uses exactly two assets".into()));
            }
            out.market = m;
        }
        if let Some(beta) = cfg.get_vector("beta")? {
            if beta != [0.5, 0.5] {
                return Err(Error::Config("beta is fixed at [0.5, 0.5] in the study".into()));
            }
        }
        if let Some(v) = cfg.get_f64("alpha1")? {
            out.alpha1 = v;
        }
        if let Some(v) = cfg.get_vector("phi_set")? {
            out.phi_set = v;
        }
        if let Some(v) = cfg.get_vector("a_set")? {
            out.a_set = v;
        }
        if let Some(v) = cfg.get_range("a_range")? {
            out.a_range = v;
        }
        if let Some(v) = cfg.get_range("phi_range")? {
            out.phi_range = v;
        }
        if let Some(v) = cfg.get_usize("grid_points")? {
            out.grid_points = v;
        }
        if let Some(v) = cfg.get_f64("phi2_ratio")? {
            out.phi2_ratio = v;
        }
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.alpha1 > 0.0 && self.alpha1.is_finite()) {
            return bad("alpha1 must be positive");
        }
        if self.grid_points < 2 {
            return bad("grid_points must be at least 2");
        }
        let (a_lo, a_hi) = self.a_range;
        if !(a_lo.is_finite() && a_hi.is_finite() && a_lo >= 1.0 && a_lo <= a_hi) {
            return bad("a_range must satisfy 1 <= lo <= hi");
        }
        let (p_lo, p_hi) = self.phi_range;
        if !(p_lo.is_finite() && p_hi.is_finite() && p_lo >= 0.0 && p_lo <= p_hi) {
            return bad("phi_range must satisfy 0 <= lo <= hi");
        }
        if self.phi_set.is_empty() || self.a_set.is_empty() {
            return bad("phi_set and a_set must be nonempty");
        }
        if self.phi_set.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return bad("phi_set members must be >= 0");
        }
        if self.a_set.iter().any(|a| !(a.is_finite() && *a >= 1.0)) {
            return bad("a_set members must be >= 1");
        }
        if !(self.phi2_ratio.is_finite() && self.phi2_ratio >= 0.0) {
            return bad("phi2_ratio must be >= 0");
        }
        Ok(())
    }

    /// Investor pair for ratio `a` and mimicking coefficient `phi`.
    pub fn group(&self, a: f64, phi: f64) -> Result<InvestorGroup> {
        InvestorGroup::from_slices(
            &[self.alpha1, a * self.alpha1],
            &[0.5, 0.5],
            &[phi, self.phi2_ratio * phi],
        )
    }
}

/// Shift of the fund's first-asset weight caused by mimicking.
pub fn delta_omega(ctx: &MarkowitzContext, group: &InvestorGroup) -> Result<f64> {
    let with = solve(ctx, group)?;
    let without = fund_aggregate(ctx, group);
    Ok(with.fund_weights[0] - without.weights[0])
}

/// Relative gain `(EU*(W*) - EU*(W0)) / EU*(W*)`, where `W0` collects the
/// investors' individual non-mimicking optima.
pub fn delta_eu(ctx: &MarkowitzContext, group: &InvestorGroup) -> Result<f64> {
    let optimum = solve(ctx, group)?;
    if !(optimum.eu_star > 0.0) {
        return Err(Error::NonPositiveOptimum(optimum.eu_star));
    }
    let baseline = PortfolioMatrix::new(individual_weight_matrix(ctx, group))?;
    let eu_baseline = penalized_utility(ctx.market(), group, &baseline)?;
    Ok((optimum.eu_star - eu_baseline) / optimum.eu_star)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub series: String,
    pub coordinate: f64,
    pub delta_omega: f64,
    pub delta_eu: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub records: Vec<SweepRecord>,
}

impl SweepTable {
    /// Records of one series, in coordinate order.
    pub fn series<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a SweepRecord> + 'a {
        self.records.iter().filter(move |r| r.series == label)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{}",
                r.series,
                format_significant(r.coordinate, CSV_DIGITS),
                format_significant(r.delta_omega, CSV_DIGITS),
                format_significant(r.delta_eu, CSV_DIGITS),
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + step * i as f64 })
        .collect()
}

pub fn series_label(name: &str, value: f64) -> String {
    format!("{name}={value}")
}

fn sweep_point(
    ctx: &MarkowitzContext,
    cfg: &StudyConfig,
    series: &str,
    coordinate: f64,
    a: f64,
    phi: f64,
) -> Result<SweepRecord> {
    let attach = |source: Error| Error::GridPoint {
        series: series.to_string(),
        coordinate,
        source: Box::new(source),
    };
    let group = cfg.group(a, phi).map_err(attach)?;
    Ok(SweepRecord {
        series: series.to_string(),
        coordinate,
        delta_omega: delta_omega(ctx, &group).map_err(attach)?,
        delta_eu: delta_eu(ctx, &group).map_err(attach)?,
    })
}

/// Figure 1 (`a` sweeps per `phi`) and figure 2 (`phi` sweeps per `a`).
pub fn run_sweeps(cfg: &StudyConfig) -> Result<(SweepTable, SweepTable)> {
    cfg.validate()?;
    let ctx = MarkowitzContext::new(&cfg.market)?;

    let a_grid = linspace(cfg.a_range.0, cfg.a_range.1, cfg.grid_points);
    let phi_grid = linspace(cfg.phi_range.0, cfg.phi_range.1, cfg.grid_points);

    let mut figure1 = SweepTable::default();
    for &phi in &cfg.phi_set {
        let label = series_label("phi", phi);
        for &a in &a_grid {
            figure1.records.push(sweep_point(&ctx, cfg, &label, a, a, phi)?);
        }
    }
    let mut figure2 = SweepTable::default();
    for &a in &cfg.a_set {
        let label = series_label("a", a);
        for &phi in &phi_grid {
            figure2.records.push(sweep_point(&ctx, cfg, &label, phi, a, phi)?);
        }
    }
    Ok((figure1, figure2))
}

/// Formats `x` with `digits` significant digits in the style of C's `%g`:
/// fixed notation for moderate exponents, scientific otherwise, trailing
/// zeros removed.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Fund weight shift computed from the two aggregate risk aversions alone.
pub fn delta_omega_from_aggregates(
    ctx: &MarkowitzContext,
    alpha_star_f: f64,
    alpha_f: f64,
) -> f64 {
    (alpha_star_f.recip() - alpha_f.recip()) * ctx.q_mu()[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ctx() -> MarkowitzContext {
        MarkowitzContext::new(&reference_market()).unwrap()
    }

    #[test]
    fn reference_market_covariance() {
        let m = reference_market();
        assert_abs_diff_eq!(m.sigma()[(0, 1)], 0.0048, epsilon = 1e-17);
        assert_abs_diff_eq!(m.sigma()[(0, 0)], 0.0144, epsilon = 1e-17);
    }

    #[test]
    fn delta_omega_reference_values() {
        let ctx = ctx();
        let cfg = StudyConfig::default();
        let d = delta_omega(&ctx, &cfg.group(2.0, 3.0).unwrap()).unwrap();
        assert_abs_diff_eq!(d, (6.0 / 17.0 - 0.375) * -1.5625, epsilon = 1e-12);
        let d = delta_omega(&ctx, &cfg.group(6.0, 3.0).unwrap()).unwrap();
        assert_abs_diff_eq!(d, (2.0 / 9.0 - 7.0 / 24.0) * -1.5625, epsilon = 1e-12);
        let d = delta_omega(&ctx, &cfg.group(4.0, 0.0).unwrap()).unwrap();
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn delta_eu_vanishes_without_mimicking_or_heterogeneity() {
        let ctx = ctx();
        let cfg = StudyConfig::default();
        assert_abs_diff_eq!(delta_eu(&ctx, &cfg.group(7.0, 0.0).unwrap()).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(delta_eu(&ctx, &cfg.group(1.0, 4.0).unwrap()).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn delta_eu_rejects_non_positive_optimum() {
        // Both means negative: every frontier portfolio loses money.
        let m = MarketModel::from_rows(
            vec![-0.07, -0.14],
            vec![vec![0.0144, 0.0048], vec![0.0048, 0.04]],
        )
        .unwrap();
        let ctx = MarkowitzContext::new(&m).unwrap();
        let g = StudyConfig::default().group(2.0, 3.0).unwrap();
        assert!(matches!(delta_eu(&ctx, &g), Err(Error::NonPositiveOptimum(_))));
    }

    #[test]
    fn formatting() {
        assert_eq!(format_significant(0.0, 15), "0");
        assert_eq!(format_significant(1.0, 15), "1");
        assert_eq!(format_significant(5.0, 15), "5");
        assert_eq!(format_significant(0.05, 15), "0.05");
        assert_eq!(format_significant(1.0 / 3.0, 15), "0.333333333333333");
        assert_eq!(format_significant(-2.0 / 3.0, 6), "-0.666667");
        assert_eq!(format_significant(1.5e-7, 15), "1.5e-7");
        assert_eq!(format_significant(123456.0, 3), "1.23e5");
        assert_eq!(format_significant(9.9999999, 3), "10");
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let g = linspace(1.0, 10.0, 101);
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[100], 10.0);
        assert_abs_diff_eq!(g[50], 5.5, epsilon = 1e-15);
    }

    #[test]
    fn config_overrides_and_validation() {
        let cfg = KeyValueConfig::parse("grid_points = 11\nphi_set = [1]\na_range = [1, 3]").unwrap();
        let study = StudyConfig::from_config(&cfg).unwrap();
        assert_eq!(study.grid_points, 11);
        assert_eq!(study.phi_set, vec![1.0]);
        let (f1, f2) = run_sweeps(&study).unwrap();
        assert_eq!(f1.records.len(), 11);
        assert_eq!(f2.records.len(), 33);

        for bad in ["grid_points = 1", "a_set = [0.5]", "phi_range = [2, 1]", "bogus = 1", "beta = [0.3, 0.7]"] {
            let cfg = KeyValueConfig::parse(bad).unwrap();
            assert!(matches!(StudyConfig::from_config(&cfg), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn grid_errors_carry_coordinates() {
        let mut cfg = StudyConfig::default();
        cfg.market = MarketModel::from_rows(
            vec![-0.07, -0.14],
            vec![vec![0.0144, 0.0048], vec![0.0048, 0.04]],
        )
        .unwrap();
        match run_sweeps(&cfg).unwrap_err() {
            Error::GridPoint { series, coordinate, source } => {
                assert_eq!(series, "phi=3");
                assert_eq!(coordinate, 1.0);
                assert!(matches!(*source, Error::NonPositiveOptimum(_)));
            }
            other => panic!("unexpected {other}"),
        }
    }
}
