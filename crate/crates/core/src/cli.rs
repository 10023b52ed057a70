//! Command line surface and file formats.
//!
//! Subcommands: `fit`, `simulate`, `benchmark`, `summarize`. Exit codes are
//! 0 on success, 1 on runtime failure and 2 on input or validation errors.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::model::{run_mcmc, CountSeries, ModelConfig, PosteriorDraws, StepTimings};
use crate::rng::RngStream;
use crate::sim::{
    aggregate, doppler_trend, run_experiment, simulate_counts, write_csv, Budget, ExperimentSpec,
    ModelKind,
};
use crate::summary::{check_level, equal_tail, median, posterior_summary, PosteriorSummary};

pub const SEED_ENV: &str = "BTF_SEED";
pub const DEFAULT_LEVEL: f64 = 0.95;
const DRAWS_MAGIC: &[u8; 8] = b"NBBTFDRW";
const DRAWS_VERSION: u32 = 1;

/// A failed command: message plus exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Mcmc { .. } | Error::NotPositiveDefinite { .. } | Error::NonFinite(_) => {
                CliError::runtime(e.to_string())
            }
            _ => CliError::input(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::runtime(format!("cannot write {}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "nbbtf", version, about = "Negative binomial Bayesian trend filtering")]
pub struct Cli {
    /// key=value config file with [model], [mcmc], [summary] and [benchmark] sections
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a count series (CSV with `time,count` columns).
    Fit(FitArgs),
    /// Write a synthetic series from the doppler trend.
    Simulate(SimulateArgs),
    /// Run the simulation study grid.
    Benchmark(BenchmarkArgs),
    /// Recompute the summary of saved draws at another level.
    Summarize(SummarizeArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for summary.csv, draws.bin and report.json
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub sigma_tau: Option<f64>,
    #[arg(long)]
    pub r_fixed: Option<u64>,
    #[arg(long)]
    pub r_prior_mean: Option<f64>,
    #[arg(long)]
    pub mh_step: Option<u64>,
    #[arg(long)]
    pub init_var: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent chains, pooled after burnin
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub level: Option<f64>,
    /// Also write draws.csv
    #[arg(long)]
    pub csv_draws: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long = "T")]
    pub t_len: Option<usize>,
    #[arg(long)]
    pub r: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub reps: Option<usize>,
    /// Comma-separated series lengths
    #[arg(long = "T", value_delimiter = ',')]
    pub lengths: Option<Vec<usize>>,
    /// Comma-separated overdispersion values
    #[arg(long, value_delimiter = ',')]
    pub r: Option<Vec<u64>>,
    /// Comma-separated subset of exp, nb, gau, logGau
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    /// 105000 iterations, 100000 burnin, 100 replicates
    #[arg(long)]
    pub paper_budget: bool,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for raw.csv and aggregate.csv
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub draws: PathBuf,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

// ---------------------------------------------------------------- config file

const CONFIG_KEYS: &[&str] = &[
    "model.degree",
    "model.sigma_tau",
    "model.r_fixed",
    "model.r_prior_mean",
    "model.mh_step",
    "model.init_var",
    "mcmc.iterations",
    "mcmc.burnin",
    "mcmc.thin",
    "mcmc.seed",
    "mcmc.chains",
    "mcmc.workers",
    "summary.level",
    "benchmark.reps",
    "benchmark.T",
    "benchmark.r",
    "benchmark.models",
    "benchmark.workers",
    "benchmark.paper_budget",
];

/// Parsed `[section]` / `key = value` file. Keys are stored as
/// `section.key`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            let lineno = i + 1;
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::input(format!("config line {lineno}: bad section")))?;
                section = Some(name.trim().to_string());
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::input(format!("config line {lineno}: expected key = value")))?;
            let sec = section
                .as_deref()
                .ok_or_else(|| CliError::input(format!("config line {lineno}: key outside a section")))?;
            let key = format!("{sec}.{}", k.trim());
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(CliError::input(format!("config line {lineno}: unknown key `{key}`")));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::input(format!("config key `{key}`: cannot parse `{v}`"))),
        }
    }

    pub fn get_list<T: std::str::FromStr>(&self, key: &str) -> CliResult<Option<Vec<T>>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| CliError::input(format!("config key `{key}`: cannot parse `{s}`")))
                })
                .collect::<CliResult<Vec<T>>>()
                .map(Some),
        }
    }
}

fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::input(format!("{SEED_ENV} is not an unsigned integer: `{v}`"))),
        Err(_) => Ok(None),
    }
}

/// Seed by precedence: flag, config file, environment, default.
fn resolve_seed(flag: Option<u64>, file: &ConfigFile, default: u64) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(s) = file.get("mcmc.seed")? {
        return Ok(s);
    }
    Ok(env_seed()?.unwrap_or(default))
}

/// Resolved settings of `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub model: ModelConfig,
    pub chains: usize,
    pub workers: usize,
    pub level: f64,
}

pub fn resolve_fit(args: &FitArgs, file: &ConfigFile) -> CliResult<FitSettings> {
    let d = ModelConfig::default();
    let model = ModelConfig {
        degree: args.degree.or(file.get("model.degree")?).unwrap_or(d.degree),
        sigma_tau: args.sigma_tau.or(file.get("model.sigma_tau")?).unwrap_or(d.sigma_tau),
        r_fixed: args.r_fixed.or(file.get("model.r_fixed")?).or(d.r_fixed),
        r_prior_mean: args
            .r_prior_mean
            .or(file.get("model.r_prior_mean")?)
            .unwrap_or(d.r_prior_mean),
        mh_step: args.mh_step.or(file.get("model.mh_step")?).unwrap_or(d.mh_step),
        init_var: args.init_var.or(file.get("model.init_var")?).unwrap_or(d.init_var),
        iterations: args.iterations.or(file.get("mcmc.iterations")?).unwrap_or(d.iterations),
        burnin: args.burnin.or(file.get("mcmc.burnin")?).unwrap_or(d.burnin),
        thin: args.thin.or(file.get("mcmc.thin")?).unwrap_or(d.thin),
        seed: resolve_seed(args.seed, file, d.seed)?,
    };
    model.validate()?;
    let chains = args.chains.or(file.get("mcmc.chains")?).unwrap_or(1);
    let workers = args.workers.or(file.get("mcmc.workers")?).unwrap_or(1);
    if chains == 0 || workers == 0 {
        return Err(CliError::input("chains and workers must be at least 1"));
    }
    let level = args.level.or(file.get("summary.level")?).unwrap_or(DEFAULT_LEVEL);
    check_level(level)?;
    Ok(FitSettings {
        model,
        chains,
        workers,
        level,
    })
}

pub fn resolve_benchmark(args: &BenchmarkArgs, file: &ConfigFile) -> CliResult<ExperimentSpec> {
    let d = ExperimentSpec::default();
    let paper = args.paper_budget || file.get("benchmark.paper_budget")?.unwrap_or(false);
    let base = if paper { Budget::paper() } else { d.budget };
    let budget = Budget {
        iterations: args.iterations.or(file.get("mcmc.iterations")?).unwrap_or(base.iterations),
        burnin: args.burnin.or(file.get("mcmc.burnin")?).unwrap_or(base.burnin),
        thin: args.thin.or(file.get("mcmc.thin")?).unwrap_or(base.thin),
    };
    if budget.thin == 0 || budget.burnin >= budget.iterations {
        return Err(CliError::input("budget needs thin >= 1 and burnin < iterations"));
    }
    let models = match args.models.clone().or(file.get_list("benchmark.models")?) {
        Some(names) => names
            .iter()
            .map(|n| ModelKind::parse(n))
            .collect::<crate::error::Result<Vec<_>>>()?,
        None => d.models,
    };
    let reps = args
        .reps
        .or(file.get("benchmark.reps")?)
        .unwrap_or(if paper { 100 } else { d.reps });
    Ok(ExperimentSpec {
        lengths: args.lengths.clone().or(file.get_list("benchmark.T")?).unwrap_or(d.lengths),
        overdispersion: args.r.clone().or(file.get_list("benchmark.r")?).unwrap_or(d.overdispersion),
        models,
        reps,
        budget,
        workers: args.workers.or(file.get("benchmark.workers")?).unwrap_or(d.workers),
        seed: resolve_seed(args.seed, file, d.seed)?,
    })
}

// ---------------------------------------------------------------- CSV I/O

/// Reads a `time,count` CSV. Extra columns are ignored.
pub fn read_counts<R: Read>(input: R) -> CliResult<CountSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::input(format!("cannot read CSV header: {e}")))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::input(format!("missing `{name}` column")))
    };
    let (ti, ci) = (col("time")?, col("count")?);
    let mut y = Vec::new();
    let mut labels = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let row = row + 1;
        let rec = rec.map_err(|e| CliError::input(format!("row {row}: {e}")))?;
        let field = rec.get(ci).unwrap_or("");
        let c: u64 = field.parse().map_err(|_| {
            CliError::input(format!(
                "row {row}: count `{field}` is not a nonnegative integer"
            ))
        })?;
        y.push(c);
        labels.push(rec.get(ti).unwrap_or("").to_string());
    }
    if y.is_empty() {
        return Err(CliError::input("input has no data rows"));
    }
    Ok(CountSeries::with_labels(y, labels)?)
}

/// Six significant digits, shortest round-trip rendering.
pub fn fmt_sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("valid float literal");
    rounded.to_string()
}

pub const SUMMARY_COLUMNS: [&str; 9] = [
    "time",
    "y",
    "trend_median",
    "ci_lo",
    "ci_hi",
    "pred_lo",
    "pred_hi",
    "kappa_median",
    "unshrunk_flag",
];

pub fn write_summary<W: Write>(series: &CountSeries, s: &PosteriorSummary, out: W) -> CliResult<()> {
    let io = |e: csv::Error| CliError::runtime(format!("writing summary: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_COLUMNS).map_err(io)?;
    for (t, p) in s.points.iter().enumerate() {
        w.write_record([
            series.label(t),
            series.counts()[t].to_string(),
            fmt_sig6(p.trend_median),
            fmt_sig6(p.ci_lo),
            fmt_sig6(p.ci_hi),
            p.pred_lo.to_string(),
            p.pred_hi.to_string(),
            p.kappa_median.map_or_else(|| "NA".to_string(), fmt_sig6),
            u8::from(p.unshrunk).to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::runtime(format!("writing summary: {e}")))?;
    Ok(())
}

/// Plain-text export: one row per draw.
pub fn write_draws_csv<W: Write>(d: &PosteriorDraws, out: W) -> CliResult<()> {
    let io = |e: csv::Error| CliError::runtime(format!("writing draws: {e}"));
    let mut w = csv::Writer::from_writer(out);
    let t_len = d.series_len();
    let n_inc = d.h.first().map_or(0, Vec::len);
    let mut header = vec!["draw".to_string(), "r".into(), "phi".into(), "mu".into()];
    header.extend((1..=t_len).map(|t| format!("theta_{t}")));
    header.extend((1..=n_inc).map(|t| format!("h_{}", t + d.degree)));
    w.write_record(&header).map_err(io)?;
    for i in 0..d.n_draws() {
        let mut rec = vec![
            i.to_string(),
            d.r[i].to_string(),
            d.phi[i].to_string(),
            d.mu[i].to_string(),
        ];
        rec.extend(d.theta[i].iter().map(f64::to_string));
        rec.extend(d.h[i].iter().map(f64::to_string));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::runtime(format!("writing draws: {e}")))?;
    Ok(())
}

// ---------------------------------------------------------------- draws file

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawsHeader {
    pub version: u32,
    pub n_draws: usize,
    pub series_len: usize,
    pub degree: usize,
    pub config_hash: String,
    pub config: ModelConfig,
    pub chains: usize,
    pub labels: Vec<String>,
    pub y: Vec<u64>,
    pub seconds: f64,
    pub accept_rate: Option<f64>,
    pub iterations: usize,
    pub timings: StepTimings,
    pub body_sha256: String,
}

/// SHA-256 of the canonical JSON rendering of a config.
pub fn config_hash(cfg: &ModelConfig) -> String {
    let json = serde_json::to_vec(cfg).expect("config serializes");
    hex::encode(Sha256::digest(json))
}

fn draws_body(d: &PosteriorDraws) -> Vec<u8> {
    let mut body = Vec::new();
    let f64s = |body: &mut Vec<u8>, rows: &[Vec<f64>]| {
        for v in rows.iter().flatten() {
            body.extend_from_slice(&v.to_le_bytes());
        }
    };
    f64s(&mut body, &d.theta);
    f64s(&mut body, &d.h);
    f64s(&mut body, &d.kappa);
    for v in d.phi.iter().chain(&d.mu) {
        body.extend_from_slice(&v.to_le_bytes());
    }
    for v in &d.r {
        body.extend_from_slice(&v.to_le_bytes());
    }
    for v in d.y_rep.iter().flatten() {
        body.extend_from_slice(&v.to_le_bytes());
    }
    body
}

/// Magic, u32 LE header length, JSON header, then little-endian columns:
/// θ, h, κ (row-major), φ, μ, r, replicated counts.
pub fn write_draws<W: Write>(
    d: &PosteriorDraws,
    series: &CountSeries,
    cfg: &ModelConfig,
    chains: usize,
    mut out: W,
) -> std::io::Result<()> {
    let body = draws_body(d);
    let header = DrawsHeader {
        version: DRAWS_VERSION,
        n_draws: d.n_draws(),
        series_len: d.series_len(),
        degree: d.degree,
        config_hash: config_hash(cfg),
        config: cfg.clone(),
        chains,
        labels: (0..series.len()).map(|t| series.label(t)).collect(),
        y: series.counts().to_vec(),
        seconds: d.seconds,
        accept_rate: d.accept_rate,
        iterations: d.iterations,
        timings: d.timings,
        body_sha256: hex::encode(Sha256::digest(&body)),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    out.write_all(DRAWS_MAGIC)?;
    out.write_all(&(json.len() as u32).to_le_bytes())?;
    out.write_all(&json)?;
    out.write_all(&body)?;
    out.flush()
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take8(&mut self) -> [u8; 8] {
        let b = self.buf[self.pos..self.pos + 8].try_into().expect("8 bytes");
        self.pos += 8;
        b
    }

    fn f64_rows(&mut self, n: usize, m: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..m).map(|_| f64::from_le_bytes(self.take8())).collect())
            .collect()
    }

    fn f64s(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| f64::from_le_bytes(self.take8())).collect()
    }

    fn u64s(&mut self, n: usize) -> Vec<u64> {
        (0..n).map(|_| u64::from_le_bytes(self.take8())).collect()
    }
}

/// Parses and validates a draws file.
pub fn read_draws(bytes: &[u8]) -> crate::error::Result<(DrawsHeader, PosteriorDraws, CountSeries)> {
    let corrupt = |m: &str| Error::Format(format!("corrupt draws file: {m}"));
    if bytes.len() < 12 || &bytes[..8] != DRAWS_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body_start = 12usize
        .checked_add(hlen)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| corrupt("truncated header"))?;
    let header: DrawsHeader =
        serde_json::from_slice(&bytes[12..body_start]).map_err(|e| corrupt(&e.to_string()))?;
    if header.version != DRAWS_VERSION {
        return Err(corrupt(&format!("unsupported version {}", header.version)));
    }
    if header.config_hash != config_hash(&header.config) {
        return Err(corrupt("config hash mismatch"));
    }
    let (n, t, deg) = (header.n_draws, header.series_len, header.degree);
    if t <= deg || header.y.len() != t || header.labels.len() != t {
        return Err(corrupt("inconsistent dimensions"));
    }
    let inc = t - deg;
    let words = n * (2 * t + 2 * inc + 3);
    let body = &bytes[body_start..];
    if body.len() != words * 8 {
        return Err(corrupt("body length does not match header"));
    }
    if hex::encode(Sha256::digest(body)) != header.body_sha256 {
        return Err(corrupt("checksum mismatch"));
    }
    let mut c = Cursor { buf: body, pos: 0 };
    let theta = c.f64_rows(n, t);
    let h = c.f64_rows(n, inc);
    let kappa = c.f64_rows(n, inc);
    let phi = c.f64s(n);
    let mu = c.f64s(n);
    let r = c.u64s(n);
    let y_rep = (0..n).map(|_| c.u64s(t)).collect();
    let draws = PosteriorDraws {
        degree: deg,
        theta,
        r,
        phi,
        mu,
        h,
        kappa,
        y_rep,
        seconds: header.seconds,
        accept_rate: header.accept_rate,
        iterations: header.iterations,
        timings: header.timings,
    };
    let series = CountSeries::with_labels(header.y.clone(), header.labels.clone())?;
    Ok((header, draws, series))
}

// ---------------------------------------------------------------- fit

/// Runs `chains` independent chains (stream c of the seed) and pools the
/// retained draws in chain order.
pub fn fit_chains(
    series: &CountSeries,
    cfg: &ModelConfig,
    chains: usize,
    workers: usize,
) -> crate::error::Result<PosteriorDraws> {
    let start = std::time::Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let runs: Vec<crate::error::Result<PosteriorDraws>> = pool.install(|| {
        (0..chains)
            .into_par_iter()
            .map(|c| run_mcmc(series, cfg, &mut RngStream::new(cfg.seed, c as u64)))
            .collect()
    });
    let mut runs = runs.into_iter();
    let mut all = runs.next().expect("at least one chain")?;
    let mut rates: Vec<f64> = all.accept_rate.into_iter().collect();
    for run in runs {
        let d = run?;
        all.theta.extend(d.theta);
        all.r.extend(d.r);
        all.phi.extend(d.phi);
        all.mu.extend(d.mu);
        all.h.extend(d.h);
        all.kappa.extend(d.kappa);
        all.y_rep.extend(d.y_rep);
        all.iterations += d.iterations;
        all.timings.overdispersion += d.timings.overdispersion;
        all.timings.trend += d.timings.trend;
        all.timings.trend_auxiliaries += d.timings.trend_auxiliaries;
        all.timings.shrinkage += d.timings.shrinkage;
        rates.extend(d.accept_rate);
    }
    all.accept_rate = (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64);
    all.seconds = start.elapsed().as_secs_f64();
    Ok(all)
}

/// Contents of report.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub n: usize,
    pub n_draws: usize,
    pub level: f64,
    pub r_median: f64,
    pub r_ci: [u64; 2],
    pub phi_median: f64,
    pub phi_ci: [f64; 2],
    pub mu_median: f64,
    pub mu_ci: [f64; 2],
    pub accept_rate: Option<f64>,
    pub unshrunk_count: usize,
    pub n_increments: usize,
    pub unshrunk_fraction: f64,
    pub seconds: f64,
    pub timings: StepTimings,
    pub chains: usize,
    pub config: ModelConfig,
}

pub fn run_report(d: &PosteriorDraws, s: &PosteriorSummary, settings: &FitSettings) -> RunReport {
    let rf: Vec<f64> = d.r.iter().map(|&r| r as f64).collect();
    let (r_lo, r_hi) = equal_tail(&d.r, settings.level);
    let (p_lo, p_hi) = equal_tail(&d.phi, settings.level);
    let (m_lo, m_hi) = equal_tail(&d.mu, settings.level);
    RunReport {
        n: d.series_len(),
        n_draws: d.n_draws(),
        level: settings.level,
        r_median: median(&rf),
        r_ci: [r_lo, r_hi],
        phi_median: median(&d.phi),
        phi_ci: [p_lo, p_hi],
        mu_median: median(&d.mu),
        mu_ci: [m_lo, m_hi],
        accept_rate: d.accept_rate,
        unshrunk_count: s.unshrunk_count,
        n_increments: s.n_increments,
        unshrunk_fraction: s.unshrunk_fraction,
        seconds: d.seconds,
        timings: d.timings,
        chains: settings.chains,
        config: settings.model.clone(),
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))
}

fn create_file(path: &Path) -> CliResult<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", path.display())))
}

pub fn cmd_fit(args: &FitArgs, file: &ConfigFile) -> CliResult<()> {
    let settings = resolve_fit(args, file)?;
    let input = fs::File::open(&args.input)
        .map_err(|e| CliError::input(format!("cannot open {}: {e}", args.input.display())))?;
    let series = read_counts(input)?;
    let draws = fit_chains(&series, &settings.model, settings.chains, settings.workers)?;
    let summary = posterior_summary(&draws, settings.level)?;

    create_dir(&args.out)?;
    let path = args.out.join("summary.csv");
    write_summary(&series, &summary, create_file(&path)?)?;
    let path = args.out.join("draws.bin");
    write_draws(&draws, &series, &settings.model, settings.chains, create_file(&path)?)
        .map_err(write_err(&path))?;
    if args.csv_draws {
        write_draws_csv(&draws, create_file(&args.out.join("draws.csv"))?)?;
    }
    let report = run_report(&draws, &summary, &settings);
    let path = args.out.join("report.json");
    let mut w = create_file(&path)?;
    serde_json::to_writer_pretty(&mut w, &report)
        .map_err(|e| CliError::runtime(format!("writing report: {e}")))?;
    w.flush().map_err(write_err(&path))?;
    log::info!(
        "fit: T={} draws={} r median {} unshrunk {}/{} in {:.1}s",
        series.len(),
        draws.n_draws(),
        report.r_median,
        summary.unshrunk_count,
        series.len(),
        draws.seconds
    );
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs, file: &ConfigFile) -> CliResult<()> {
    let t_len = args.t_len.unwrap_or(200);
    let r = args.r.unwrap_or(10);
    if r == 0 {
        return Err(CliError::input("r must be at least 1"));
    }
    let seed = resolve_seed(args.seed, file, 1)?;
    let mean = doppler_trend(t_len)?;
    let y = simulate_counts(&mean, r, &mut RngStream::derive(seed, &[t_len as u64, r]))?;
    let mut w = csv::Writer::from_writer(create_file(&args.out)?);
    let io = |e: csv::Error| CliError::runtime(format!("writing {}: {e}", args.out.display()));
    w.write_record(["time", "count", "true_mean"]).map_err(io)?;
    for (t, (c, m)) in y.counts().iter().zip(&mean).enumerate() {
        w.write_record([(t + 1).to_string(), c.to_string(), fmt_sig6(*m)])
            .map_err(io)?;
    }
    w.flush().map_err(write_err(&args.out))?;
    Ok(())
}

pub fn cmd_benchmark(args: &BenchmarkArgs, file: &ConfigFile) -> CliResult<()> {
    let spec = resolve_benchmark(args, file)?;
    let rows = run_experiment(&spec)?;
    create_dir(&args.out)?;
    let path = args.out.join("raw.csv");
    write_csv(&rows, create_file(&path)?).map_err(|e| CliError::runtime(e.to_string()))?;
    let path = args.out.join("aggregate.csv");
    write_csv(&aggregate(&rows), create_file(&path)?)
        .map_err(|e| CliError::runtime(e.to_string()))?;
    let failed = rows.iter().filter(|r| r.failure.is_some()).count();
    if failed == rows.len() {
        return Err(CliError::runtime(format!("all {failed} fits failed")));
    }
    if failed > 0 {
        log::warn!("{failed} of {} fits failed", rows.len());
    }
    Ok(())
}

pub fn cmd_summarize(args: &SummarizeArgs, file: &ConfigFile) -> CliResult<()> {
    let level = args.level.or(file.get("summary.level")?).unwrap_or(DEFAULT_LEVEL);
    check_level(level)?;
    let bytes = fs::read(&args.draws)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", args.draws.display())))?;
    let (_, draws, series) = read_draws(&bytes)?;
    let summary = posterior_summary(&draws, level)?;
    write_summary(&series, &summary, create_file(&args.out)?)
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, &file),
        Command::Simulate(a) => cmd_simulate(a, &file),
        Command::Benchmark(a) => cmd_benchmark(a, &file),
        Command::Summarize(a) => cmd_summarize(a, &file),
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code; errors are reported on stderr.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
