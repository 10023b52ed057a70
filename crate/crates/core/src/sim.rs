//! Synthetic count series and the simulation-study harness.

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{exp_smoothing, gaussian_dhs_fit, log_backmap, GaussianDhsConfig};
use crate::error::{Error, Result};
use crate::model::{nb_draw, run_mcmc, CountSeries, ModelConfig};
use crate::rng::RngStream;
use crate::summary::{median, pointwise_bands};

/// Series lengths of the study grid.
pub const GRID_LENGTHS: [usize; 2] = [200, 500];
/// Overdispersion values of the study grid.
pub const GRID_OVERDISPERSION: [u64; 3] = [1, 10, 1000];
/// Credible levels at which coverage is recorded.
pub const COVERAGE_LEVELS: [f64; 3] = [0.90, 0.95, 0.99];

const TREND_MIN: f64 = 1.0;
const TREND_MAX: f64 = 10.0;

/// Unscaled doppler-type curve √(x(1-x)) sin(2.1π / (x + 0.05)).
pub fn doppler_raw(x: f64) -> f64 {
    (x * (1.0 - x)).sqrt() * (2.1 * std::f64::consts::PI / (x + 0.05)).sin()
}

/// Extremes of [`doppler_raw`] over [0, 1], from a dense scan refined by
/// golden-section search around the best grid points.
fn doppler_range() -> (f64, f64) {
    static RANGE: OnceLock<(f64, f64)> = OnceLock::new();
    *RANGE.get_or_init(|| {
        const N: usize = 1_000_000;
        let h = 1.0 / N as f64;
        let (mut imin, mut imax) = (0, 0);
        let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..=N {
            let v = doppler_raw(i as f64 * h);
            if v < vmin {
                vmin = v;
                imin = i;
            }
            if v > vmax {
                vmax = v;
                imax = i;
            }
        }
        let refine = |i: usize, sign: f64| {
            let f = |x: f64| sign * doppler_raw(x);
            let mut a = (i as f64 - 1.0).max(0.0) * h;
            let mut b = (i as f64 + 1.0).min(N as f64) * h;
            let g = (5f64.sqrt() - 1.0) / 2.0;
            while b - a > 1e-15 {
                let c = b - g * (b - a);
                let d = a + g * (b - a);
                if f(c) < f(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            let x = 0.5 * (a + b);
            doppler_raw(x)
        };
        (refine(imin, 1.0).min(vmin), refine(imax, -1.0).max(vmax))
    })
}

/// Trend value at x ∈ [0, 1], affinely mapped so the curve spans [1, 10].
pub fn doppler_mean(x: f64) -> f64 {
    let (lo, hi) = doppler_range();
    let v = TREND_MIN + (TREND_MAX - TREND_MIN) * (doppler_raw(x) - lo) / (hi - lo);
    v.clamp(TREND_MIN, TREND_MAX)
}

/// Mean trend at x_t = t / (T + 1), t = 1..T. Longer series infill the same
/// curve.
pub fn doppler_trend(t_len: usize) -> Result<Vec<f64>> {
    if t_len < 50 {
        return Err(Error::InvalidArgument(format!(
            "trend length must be at least 50 (got {t_len})"
        )));
    }
    let denom = (t_len + 1) as f64;
    Ok((1..=t_len).map(|t| doppler_mean(t as f64 / denom)).collect())
}

/// Y_t ~ NB(r, mean_t / (r + mean_t)) drawn as a Poisson-Gamma mixture.
pub fn simulate_counts(mean: &[f64], r_true: u64, rng: &mut RngStream) -> Result<CountSeries> {
    if r_true == 0 {
        return Err(Error::InvalidArgument("r must be at least 1".into()));
    }
    if mean.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
        return Err(Error::InvalidArgument("means must be positive".into()));
    }
    Ok(CountSeries::new(
        mean.iter().map(|&m| nb_draw(m, r_true, rng)).collect(),
    ))
}

pub fn rmse(truth: &[f64], point: &[f64]) -> Result<f64> {
    if truth.len() != point.len() || truth.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: point.len(),
        });
    }
    let ss: f64 = truth.iter().zip(point).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((ss / truth.len() as f64).sqrt())
}

/// RMSE, mean interval width and empirical coverage of one fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalMetrics {
    pub rmse: f64,
    pub mciw: f64,
    pub emp_cov: f64,
}

pub fn compute_metrics(
    truth: &[f64],
    point: &[f64],
    lower: &[f64],
    upper: &[f64],
) -> Result<IntervalMetrics> {
    let n = truth.len();
    for got in [point.len(), lower.len(), upper.len()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    let rmse = rmse(truth, point)?;
    let mciw = upper.iter().zip(lower).map(|(u, l)| u - l).sum::<f64>() / n as f64;
    let covered = (0..n)
        .filter(|&t| lower[t] <= truth[t] && truth[t] <= upper[t])
        .count();
    Ok(IntervalMetrics {
        rmse,
        mciw,
        emp_cov: covered as f64 / n as f64,
    })
}

/// Trend estimators compared in the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    ExpSmooth,
    NbBtf,
    GauDhs,
    LogGauDhs,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::ExpSmooth => "Exp-Smooth",
            ModelKind::NbBtf => "NB-BTF",
            ModelKind::GauDhs => "Gau-DHS",
            ModelKind::LogGauDhs => "logGau-DHS",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exp" | "exp-smooth" | "ses" => Ok(ModelKind::ExpSmooth),
            "nb" | "nb-btf" | "nbbtf" => Ok(ModelKind::NbBtf),
            "gau" | "gau-dhs" => Ok(ModelKind::GauDhs),
            "loggau" | "loggau-dhs" => Ok(ModelKind::LogGauDhs),
            other => Err(Error::InvalidArgument(format!("unknown model `{other}`"))),
        }
    }

    fn index(&self) -> u64 {
        *self as u64
    }
}

/// MCMC budget shared by the Bayesian fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
}

impl Budget {
    pub fn desk() -> Self {
        Self {
            iterations: 25_000,
            burnin: 20_000,
            thin: 5,
        }
    }

    /// 105 000 iterations, 100 000 burnin, 1000 retained draws.
    pub fn paper() -> Self {
        Self {
            iterations: 105_000,
            burnin: 100_000,
            thin: 5,
        }
    }
}

/// One cell of the design with a replicate id.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub t_len: usize,
    pub r_true: u64,
    pub replicate: usize,
    pub seed: u64,
}

impl SimScenario {
    fn stream(&self, slot: u64) -> RngStream {
        RngStream::derive(
            self.seed,
            &[self.t_len as u64, self.r_true, self.replicate as u64, slot],
        )
    }
}

/// Metrics of one model on one simulated series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub t_len: usize,
    pub r_true: u64,
    pub replicate: usize,
    pub rmse: Option<f64>,
    pub mciw: Option<f64>,
    pub cov90: Option<f64>,
    pub cov95: Option<f64>,
    pub cov99: Option<f64>,
    /// Time points with a negative 95% credible lower bound.
    pub neg_ci_lower: Option<usize>,
    /// Time points with a negative 95% predictive lower bound.
    pub neg_pred_lower: Option<usize>,
    pub r_median: Option<f64>,
    pub seconds: f64,
    pub failure: Option<String>,
}

impl MetricRow {
    fn empty(model: ModelKind, sc: &SimScenario) -> Self {
        Self {
            model: model.name().to_string(),
            t_len: sc.t_len,
            r_true: sc.r_true,
            replicate: sc.replicate,
            rmse: None,
            mciw: None,
            cov90: None,
            cov95: None,
            cov99: None,
            neg_ci_lower: None,
            neg_pred_lower: None,
            r_median: None,
            seconds: 0.0,
            failure: None,
        }
    }
}

/// What to run: the design grid, models, replicates and budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub lengths: Vec<usize>,
    pub overdispersion: Vec<u64>,
    pub models: Vec<ModelKind>,
    pub reps: usize,
    pub budget: Budget,
    pub workers: usize,
    pub seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            lengths: GRID_LENGTHS.to_vec(),
            overdispersion: GRID_OVERDISPERSION.to_vec(),
            models: vec![
                ModelKind::ExpSmooth,
                ModelKind::NbBtf,
                ModelKind::GauDhs,
                ModelKind::LogGauDhs,
            ],
            reps: 10,
            budget: Budget::desk(),
            workers: 4,
            seed: 2023,
        }
    }
}

fn count_negative(xs: &[f64]) -> usize {
    xs.iter().filter(|v| **v < 0.0).count()
}

/// Fills interval metrics from draws of the count-scale trend.
fn fill_from_draws(row: &mut MetricRow, truth: &[f64], draws: &[Vec<f64>]) -> Result<()> {
    let mut covs = [0.0; 3];
    for (k, &level) in COVERAGE_LEVELS.iter().enumerate() {
        let (med, lo, hi) = pointwise_bands(draws, level);
        let m = compute_metrics(truth, &med, &lo, &hi)?;
        covs[k] = m.emp_cov;
        if (level - 0.95).abs() < 1e-12 {
            row.rmse = Some(m.rmse);
            row.mciw = Some(m.mciw);
            row.neg_ci_lower = Some(count_negative(&lo));
        }
    }
    row.cov90 = Some(covs[0]);
    row.cov95 = Some(covs[1]);
    row.cov99 = Some(covs[2]);
    Ok(())
}

fn fit_one(
    model: ModelKind,
    sc: &SimScenario,
    truth: &[f64],
    y: &CountSeries,
    budget: Budget,
) -> Result<MetricRow> {
    let mut row = MetricRow::empty(model, sc);
    let mut rng = sc.stream(1 + model.index());
    let start = Instant::now();
    let yf: Vec<f64> = y.counts().iter().map(|&c| c as f64).collect();
    let gcfg = GaussianDhsConfig {
        iterations: budget.iterations,
        burnin: budget.burnin,
        thin: budget.thin,
        ..GaussianDhsConfig::default()
    };
    match model {
        ModelKind::ExpSmooth => {
            let fit = exp_smoothing(&yf)?;
            row.rmse = Some(rmse(truth, &fit.level)?);
        }
        ModelKind::NbBtf => {
            let cfg = ModelConfig {
                r_fixed: (sc.r_true >= 1000).then_some(sc.r_true),
                iterations: budget.iterations,
                burnin: budget.burnin,
                thin: budget.thin,
                seed: sc.seed,
                ..ModelConfig::default()
            };
            let draws = run_mcmc(y, &cfg, &mut rng)?;
            fill_from_draws(&mut row, truth, &draws.trend())?;
            let yrep: Vec<Vec<f64>> = draws
                .y_rep
                .iter()
                .map(|r| r.iter().map(|&v| v as f64).collect())
                .collect();
            let (_, pred_lo, _) = pointwise_bands(&yrep, 0.95);
            row.neg_pred_lower = Some(count_negative(&pred_lo));
            let rs: Vec<f64> = draws.r.iter().map(|&r| r as f64).collect();
            row.r_median = Some(median(&rs));
        }
        ModelKind::GauDhs => {
            let fit = gaussian_dhs_fit(&yf, &gcfg, &mut rng)?;
            fill_from_draws(&mut row, truth, &fit.beta)?;
        }
        ModelKind::LogGauDhs => {
            let logy: Vec<f64> = yf.iter().map(|v| (v + 1.0).ln()).collect();
            let fit = gaussian_dhs_fit(&logy, &gcfg, &mut rng)?;
            let trend: Vec<Vec<f64>> = fit
                .beta
                .iter()
                .zip(&fit.sigma_eps)
                .map(|(b, s)| b.iter().map(|v| log_backmap(*v, s * s)).collect())
                .collect();
            fill_from_draws(&mut row, truth, &trend)?;
        }
    }
    row.seconds = start.elapsed().as_secs_f64();
    Ok(row)
}

/// Simulates one series per (scenario, replicate) and fits every model on
/// it. Tasks run on a pool of `spec.workers` threads; output order and
/// values depend only on `spec`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<MetricRow>> {
    if spec.reps == 0 {
        return Err(Error::InvalidArgument("reps must be at least 1".into()));
    }
    if spec.models.is_empty() {
        return Err(Error::InvalidArgument("no models requested".into()));
    }
    let mut scenarios = Vec::new();
    for &t_len in &spec.lengths {
        doppler_trend(t_len)?;
        for &r_true in &spec.overdispersion {
            if r_true == 0 {
                return Err(Error::InvalidArgument("r must be at least 1".into()));
            }
            for replicate in 0..spec.reps {
                scenarios.push(SimScenario {
                    t_len,
                    r_true,
                    replicate,
                    seed: spec.seed,
                });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let rows: Vec<Vec<MetricRow>> = pool.install(|| {
        scenarios
            .par_iter()
            .map(|sc| {
                let truth = doppler_trend(sc.t_len).expect("length validated above");
                let y = simulate_counts(&truth, sc.r_true, &mut sc.stream(0))
                    .expect("positive trend");
                spec.models
                    .iter()
                    .map(|&m| {
                        fit_one(m, sc, &truth, &y, spec.budget).unwrap_or_else(|e| {
                            log::warn!(
                                "{} failed on T={} r={} rep={}: {e}",
                                m.name(),
                                sc.t_len,
                                sc.r_true,
                                sc.replicate
                            );
                            MetricRow {
                                failure: Some(e.to_string()),
                                ..MetricRow::empty(m, sc)
                            }
                        })
                    })
                    .collect()
            })
            .collect()
    });
    Ok(rows.into_iter().flatten().collect())
}

/// Mean ± sd of each metric per (T, r, model) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub t_len: usize,
    pub r_true: u64,
    pub model: String,
    pub n_ok: usize,
    pub n_failed: usize,
    pub rmse_mean: Option<f64>,
    pub rmse_sd: Option<f64>,
    pub mciw_mean: Option<f64>,
    pub mciw_sd: Option<f64>,
    pub cov90_mean: Option<f64>,
    pub cov95_mean: Option<f64>,
    pub cov99_mean: Option<f64>,
    pub neg_ci_lower_total: Option<usize>,
    pub seconds_mean: f64,
}

/// Sample mean and (n - 1) standard deviation; sd is 0 for a single value.
pub fn mean_sd(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((m, sd))
}

pub fn aggregate(rows: &[MetricRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(usize, u64, String)> = Vec::new();
    for r in rows {
        let k = (r.t_len, r.r_true, r.model.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(t_len, r_true, model)| {
            let cell: Vec<&MetricRow> = rows
                .iter()
                .filter(|r| r.t_len == t_len && r.r_true == r_true && r.model == model)
                .collect();
            let ok: Vec<&MetricRow> = cell.iter().copied().filter(|r| r.failure.is_none()).collect();
            let collect = |f: fn(&MetricRow) -> Option<f64>| -> Vec<f64> {
                ok.iter().filter_map(|r| f(r)).collect()
            };
            let rmse = mean_sd(&collect(|r| r.rmse));
            let mciw = mean_sd(&collect(|r| r.mciw));
            let neg: Vec<usize> = ok.iter().filter_map(|r| r.neg_ci_lower).collect();
            let secs: Vec<f64> = ok.iter().map(|r| r.seconds).collect();
            AggregateRow {
                t_len,
                r_true,
                model,
                n_ok: ok.len(),
                n_failed: cell.len() - ok.len(),
                rmse_mean: rmse.map(|v| v.0),
                rmse_sd: rmse.map(|v| v.1),
                mciw_mean: mciw.map(|v| v.0),
                mciw_sd: mciw.map(|v| v.1),
                cov90_mean: mean_sd(&collect(|r| r.cov90)).map(|v| v.0),
                cov95_mean: mean_sd(&collect(|r| r.cov95)).map(|v| v.0),
                cov99_mean: mean_sd(&collect(|r| r.cov99)).map(|v| v.0),
                neg_ci_lower_total: (!neg.is_empty()).then(|| neg.iter().sum()),
                seconds_mean: mean_sd(&secs).map_or(0.0, |v| v.0),
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
