//! `mimic` command-line interface.
//!
//! Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numerical
//! failure, 4 verification disagreement. Machine-readable output goes to
//! stdout or the requested files; diagnostics go to stderr.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{KeyValueConfig, GROUP_KEYS, MARKET_KEYS};
use crate::error::{Error, ErrorKind, Result};
use crate::markowitz::{fund_aggregate, individual_weight_matrix, FrontierPoint, MarkowitzContext};
use crate::mimicking::{penalized_utility, solve};
use crate::model::{InvestorGroup, MarketModel, PortfolioMatrix};
use crate::moments;
use crate::study::{self, format_significant, StudyConfig};
use crate::verify::{self, VerifyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

const SUMMARY_DIGITS: usize = 6;

#[derive(Debug, Parser)]
#[command(name = "mimic", version, about = "Optimal portfolios for mimicking mean-variance investors")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the pooled problem with and without mimicking.
    Solve(SolveArgs),
    /// Cross-check the closed form against the KKT oracle on random instances.
    Verify(VerifyArgs),
    /// Write the weight-shift and utility-gain sweeps as CSV.
    Study(StudyArgs),
    /// Estimate mean returns and covariance from a CSV of returns.
    Estimate(EstimateArgs),
}

#[derive(Debug, Args)]
struct MarketArgs {
    /// CSV of per-period returns (header row of asset names).
    #[arg(long)]
    returns: Option<PathBuf>,
    /// Periods per year used to annualize estimated moments.
    #[arg(long, requires = "returns")]
    annualize: Option<u32>,
    /// Expected returns as a JSON array.
    #[arg(long, conflicts_with = "returns")]
    mu: Option<String>,
    /// Covariance as a JSON array of rows.
    #[arg(long, conflicts_with = "returns")]
    sigma: Option<String>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Key-value config file with market and/or group keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    market: MarketArgs,
    /// Risk aversions as a JSON array.
    #[arg(long)]
    alpha: Option<String>,
    /// Wealth shares as a JSON array.
    #[arg(long)]
    beta: Option<String>,
    /// Mimicking coefficients as a JSON array.
    #[arg(long)]
    phi: Option<String>,
    /// Output file (JSON); stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 500)]
    count: usize,
    #[arg(long, default_value_t = 10)]
    max_k: usize,
    #[arg(long, default_value_t = 10)]
    max_n: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Debug, Args)]
struct StudyArgs {
    /// Key-value config overriding the study defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory receiving figure1.csv, figure2.csv and manifest.json.
    #[arg(long, default_value = "study-output")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    returns: PathBuf,
    #[arg(long)]
    annualize: Option<u32>,
    /// Output file (JSON); stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Provenance record written next to every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: Value,
    pub inputs: Vec<InputDigest>,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` overrides the clock.
    pub timestamp: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl RunManifest {
    fn new(command: &str, config: Value, inputs: &[&Path]) -> Result<Self> {
        let inputs = inputs
            .iter()
            .map(|p| {
                let bytes = fs::read(p).map_err(|e| Error::io(*p, e))?;
                let digest = Sha256::digest(&bytes);
                Ok(InputDigest {
                    path: p.display().to_string(),
                    sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
                })
            })
            .collect::<Result<_>>()?;
        let timestamp = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or_else(|| {
                SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            });
        Ok(Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs,
            timestamp,
        })
    }
}

enum Failure {
    Error(Error),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Validation => EXIT_VALIDATION,
        ErrorKind::Io => EXIT_IO,
        ErrorKind::Numerical => EXIT_NUMERICAL,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a, stdout, stderr),
        Command::Verify(a) => cmd_verify(a, stdout),
        Command::Study(a) => cmd_study(a, stderr),
        Command::Estimate(a) => cmd_estimate(a, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Verification) => EXIT_VERIFICATION,
        Err(Failure::Error(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(e.kind())
        }
    }
}

fn parse_json_flag(name: &str, text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("--{name}: {e}")))
}

fn write_output(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

fn vector(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn point_json(p: &FrontierPoint) -> Value {
    json!({ "mean": p.mean, "variance": p.variance })
}

fn resolve_market(
    args: &MarketArgs,
    cfg: &KeyValueConfig,
    inputs: &mut Vec<PathBuf>,
) -> Result<(MarketModel, Option<Vec<String>>)> {
    let from_flags = args.mu.is_some() || args.sigma.is_some();
    let from_config = MARKET_KEYS.iter().any(|k| cfg.contains(k));
    if let Some(path) = &args.returns {
        if from_config {
            return Err(Error::Config("market given by both --returns and config".into()));
        }
        let sample = moments::load_csv(path)?;
        inputs.push(path.clone());
        let market = moments::estimate(&sample, args.annualize)?;
        return Ok((market, Some(sample.asset_names().to_vec())));
    }
    if from_flags {
        if from_config {
            return Err(Error::Config("market given by both flags and config".into()));
        }
        let mut flags = KeyValueConfig::default();
        let mu = args.mu.as_deref().ok_or_else(|| Error::Config("--mu requires --sigma".into()));
        let sigma = args.sigma.as_deref().ok_or_else(|| Error::Config("--sigma requires --mu".into()));
        flags.insert("mu", parse_json_flag("mu", mu?)?);
        flags.insert("sigma", parse_json_flag("sigma", sigma?)?);
        return Ok((flags.market()?.expect("both keys present"), None));
    }
    match cfg.market()? {
        Some(m) => Ok((m, None)),
        None => Err(Error::Config(
            "no market: use --returns, --mu/--sigma or mu/sigma in --config".into(),
        )),
    }
}

fn resolve_group(args: &SolveArgs, cfg: &KeyValueConfig) -> Result<InvestorGroup> {
    let flags = [("alpha", &args.alpha), ("beta", &args.beta), ("phi", &args.phi)];
    if flags.iter().any(|(_, v)| v.is_some()) {
        if GROUP_KEYS.iter().any(|k| cfg.contains(k)) {
            return Err(Error::Config("investor group given by both flags and config".into()));
        }
        let mut group = KeyValueConfig::default();
        for (name, value) in flags {
            let text = value
                .as_deref()
                .ok_or_else(|| Error::Config(format!("--{name} is required with the other group flags")))?;
            group.insert(name, parse_json_flag(name, text)?);
        }
        return Ok(group.group()?.expect("all keys present"));
    }
    cfg.group()?.ok_or_else(|| {
        Error::Config("no investor group: use --alpha/--beta/--phi or a config file".into())
    })
}

fn cmd_solve(args: SolveArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> std::result::Result<(), Failure> {
    let mut inputs = Vec::new();
    let cfg = match &args.config {
        Some(p) => {
            inputs.push(p.clone());
            KeyValueConfig::load(p)?
        }
        None => KeyValueConfig::default(),
    };
    cfg.check_keys(&["mu", "sigma", "alpha", "beta", "phi"])?;
    let (market, asset_names) = resolve_market(&args.market, &cfg, &mut inputs)?;
    let group = resolve_group(&args, &cfg)?;

    let ctx = MarkowitzContext::new(&market)?;
    let mimic = solve(&ctx, &group)?;
    let classical = fund_aggregate(&ctx, &group);
    let individual = PortfolioMatrix::new(individual_weight_matrix(&ctx, &group))?;
    let eu_classical = penalized_utility(&market, &group, &individual)?;
    let gain = (mimic.eu_star > 0.0).then(|| (mimic.eu_star - eu_classical) / mimic.eu_star);

    let echo = json!({
        "market": { "mu": vector(market.mu()), "sigma": matrix_rows(market.sigma()),
                    "annualize": args.market.annualize },
        "group": { "alpha": vector(group.alpha()), "beta": vector(group.beta()), "phi": vector(group.phi()) },
    });
    let input_paths: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let manifest = RunManifest::new("solve", echo.clone(), &input_paths)?;
    let doc = json!({
        "manifest": manifest,
        "assets": asset_names,
        "market": echo["market"],
        "group": echo["group"],
        "mimicking": {
            "investor_weights": matrix_columns(mimic.w_star.as_matrix()),
            "fund_weights": vector(&mimic.fund_weights),
            "alpha_f": mimic.alpha_star_f,
            "fund": point_json(&mimic.point),
            "penalized_utility": mimic.eu_star,
        },
        "classical": {
            "investor_weights": matrix_columns(individual.as_matrix()),
            "fund_weights": vector(&classical.weights),
            "alpha_f": classical.alpha_f,
            "fund": point_json(&classical.point),
            "penalized_utility": eu_classical,
        },
        "delta_fund_weights": vector(&(&mimic.fund_weights - &classical.weights)),
        "relative_utility_gain": gain,
    });
    let text = serde_json::to_string_pretty(&doc).expect("JSON serialization") + "\n";
    write_output(args.output.as_deref(), &text, stdout)?;

    let f = |x: f64| format_significant(x, SUMMARY_DIGITS);
    let _ = writeln!(
        stderr,
        "alpha*_f = {} (classical {}), EU* = {} (classical {})",
        f(mimic.alpha_star_f),
        f(classical.alpha_f),
        f(mimic.eu_star),
        f(eu_classical)
    );
    Ok(())
}

fn cmd_verify(args: VerifyArgs, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    let report = verify::run(VerifyConfig {
        count: args.count,
        max_k: args.max_k,
        max_n: args.max_n,
        seed: args.seed,
    })?;
    write!(stdout, "{report}").map_err(|e| Error::io("<stdout>", e))?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn cmd_study(args: StudyArgs, stderr: &mut dyn Write) -> std::result::Result<(), Failure> {
    let mut inputs = Vec::new();
    let cfg = match &args.config {
        Some(p) => {
            inputs.push(p.as_path());
            StudyConfig::from_config(&KeyValueConfig::load(p)?)?
        }
        None => StudyConfig::default(),
    };
    let (figure1, figure2) = study::run_sweeps(&cfg)?;

    let dir = &args.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let echo = json!({
        "mu": vector(cfg.market.mu()),
        "sigma": matrix_rows(cfg.market.sigma()),
        "alpha1": cfg.alpha1,
        "beta": [0.5, 0.5],
        "phi_set": cfg.phi_set,
        "a_set": cfg.a_set,
        "a_range": [cfg.a_range.0, cfg.a_range.1],
        "phi_range": [cfg.phi_range.0, cfg.phi_range.1],
        "grid_points": cfg.grid_points,
        "phi2_ratio": cfg.phi2_ratio,
    });
    let manifest = RunManifest::new("study", echo, &inputs)?;
    for (name, table) in [("figure1.csv", &figure1), ("figure2.csv", &figure2)] {
        let path = dir.join(name);
        fs::write(&path, table.to_csv_string()).map_err(|e| Error::io(&path, e))?;
    }
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("JSON serialization") + "\n";
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    let _ = writeln!(
        stderr,
        "wrote {} + {} records to {}",
        figure1.records.len(),
        figure2.records.len(),
        dir.display()
    );
    Ok(())
}

fn cmd_estimate(args: EstimateArgs, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    let sample = moments::load_csv(&args.returns)?;
    let market = moments::estimate(&sample, args.annualize)?;
    let manifest = RunManifest::new(
        "estimate",
        json!({ "annualize": args.annualize }),
        &[args.returns.as_path()],
    )?;
    let doc = json!({
        "manifest": manifest,
        "assets": sample.asset_names(),
        "observations": sample.t(),
        "mu": vector(market.mu()),
        "sigma": matrix_rows(market.sigma()),
    });
    let text = serde_json::to_string_pretty(&doc).expect("JSON serialization") + "\n";
    write_output(args.output.as_deref(), &text, stdout)?;
    Ok(())
}
