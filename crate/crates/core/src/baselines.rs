//! Comparator trend filters: simple exponential smoothing and the Gaussian
//! dynamic shrinkage trend filter (on raw or log-transformed counts).

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::banded::{sample_mvn_canonical, DifferenceOperator, SymBandedMatrix};
use crate::dhs::{update_dhs, DhsPriorConfig, DhsState, OmoriMixture};
use crate::error::{ensure_finite, Error, Result};
use crate::rng::RngStream;

const ALPHA_MIN: f64 = 0.01;
const ALPHA_MAX: f64 = 0.999;

/// Fitted simple exponential smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct SesFit {
    pub alpha: f64,
    pub level: Vec<f64>,
    pub sse: f64,
}

/// Level sequence ŷ_t = α y_t + (1 - α) ŷ_{t-1}, ŷ₁ = y₁.
pub fn ses_levels(y: &[f64], alpha: f64) -> Vec<f64> {
    let mut level = Vec::with_capacity(y.len());
    let mut prev = y[0];
    level.push(prev);
    for &v in &y[1..] {
        prev = alpha * v + (1.0 - alpha) * prev;
        level.push(prev);
    }
    level
}

/// One-step-ahead squared error Σ_{t≥2} (y_t - ŷ_{t-1})².
pub fn ses_sse(y: &[f64], alpha: f64) -> f64 {
    let mut prev = y[0];
    let mut sse = 0.0;
    for &v in &y[1..] {
        sse += (v - prev).powi(2);
        prev = alpha * v + (1.0 - alpha) * prev;
    }
    sse
}

/// Exponential smoothing with a fixed smoothing weight.
pub fn exp_smoothing_with_alpha(y: &[f64], alpha: f64) -> Result<SesFit> {
    if y.len() < 2 {
        return Err(Error::InvalidArgument(
            "exponential smoothing needs at least 2 observations".into(),
        ));
    }
    ensure_finite(y, "series")?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "smoothing weight must lie in (0, 1] (got {alpha})"
        )));
    }
    Ok(SesFit {
        alpha,
        level: ses_levels(y, alpha),
        sse: ses_sse(y, alpha),
    })
}

/// Exponential smoothing with α ∈ [0.01, 0.999] minimizing the one-step-ahead
/// SSE: a coarse scan brackets the minimum, golden-section search refines it.
pub fn exp_smoothing(y: &[f64]) -> Result<SesFit> {
    if y.len() < 2 {
        return Err(Error::InvalidArgument(
            "exponential smoothing needs at least 2 observations".into(),
        ));
    }
    ensure_finite(y, "series")?;
    const SCAN: usize = 50;
    let grid: Vec<f64> = (0..=SCAN)
        .map(|i| ALPHA_MIN + (ALPHA_MAX - ALPHA_MIN) * i as f64 / SCAN as f64)
        .collect();
    let best = grid
        .iter()
        .enumerate()
        .min_by(|a, b| ses_sse(y, *a.1).total_cmp(&ses_sse(y, *b.1)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(SCAN)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (ses_sse(y, c), ses_sse(y, d));
    while b - a > 1e-10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = ses_sse(y, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = ses_sse(y, d);
        }
    }
    let mut alpha = 0.5 * (a + b);
    // the bracket endpoints themselves may be better at the box boundary
    for cand in [grid[best], ALPHA_MIN, ALPHA_MAX] {
        if ses_sse(y, cand) < ses_sse(y, alpha) {
            alpha = cand;
        }
    }
    exp_smoothing_with_alpha(y, alpha)
}

/// Gaussian-observation trend filter with the dynamic horseshoe prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianDhsConfig {
    pub degree: usize,
    pub init_var: f64,
    /// Inverse-gamma shape and rate of the observation variance.
    pub obs_shape: f64,
    pub obs_rate: f64,
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
}

impl Default for GaussianDhsConfig {
    fn default() -> Self {
        Self {
            degree: 2,
            init_var: 100.0,
            obs_shape: 0.01,
            obs_rate: 0.01,
            iterations: 105_000,
            burnin: 100_000,
            thin: 5,
        }
    }
}

impl GaussianDhsConfig {
    pub fn retained(&self) -> usize {
        if self.thin == 0 || self.iterations <= self.burnin {
            0
        } else {
            (self.iterations - self.burnin) / self.thin
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDhsDraws {
    pub beta: Vec<Vec<f64>>,
    pub sigma_eps: Vec<f64>,
    pub seconds: f64,
}

/// Precision Q_β = I/σ² + Dᵀ Σ_ω⁻¹ D and linear term y/σ².
pub fn gaussian_system(
    y: &[f64],
    sigma2: f64,
    h: &[f64],
    op: &DifferenceOperator,
    init_var: f64,
) -> Result<(SymBandedMatrix, Vec<f64>)> {
    if y.len() != op.len() || h.len() != op.n_increments() {
        return Err(Error::DimensionMismatch {
            expected: op.len(),
            got: y.len(),
        });
    }
    let weights: Vec<f64> = std::iter::repeat_n(1.0 / init_var, op.degree())
        .chain(h.iter().map(|x| (-x).exp()))
        .collect();
    let mut q = op.weighted_gram(&weights)?;
    q.add_diagonal(&vec![1.0 / sigma2; y.len()]);
    Ok((q, y.iter().map(|v| v / sigma2).collect()))
}

/// σ² ~ IG(shape + n/2, rate + rss/2).
pub fn sample_obs_variance(rss: f64, n: usize, shape: f64, rate: f64, rng: &mut RngStream) -> f64 {
    let g = rng.gamma(shape + 0.5 * n as f64, 1.0 / (rate + 0.5 * rss));
    1.0 / g
}

fn moving_average(x: &[f64], half_width: usize) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|t| {
            let lo = t.saturating_sub(half_width);
            let hi = (t + half_width).min(n - 1);
            x[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Gibbs sampler for y_t = β_t + ε_t, ε_t ~ N(0, σ_ε²), with the dynamic
/// horseshoe prior on Δᴰβ and σ_τ = σ_ε/√T recomputed every iteration.
pub fn gaussian_dhs_fit(
    y: &[f64],
    cfg: &GaussianDhsConfig,
    rng: &mut RngStream,
) -> Result<GaussianDhsDraws> {
    let start = Instant::now();
    ensure_finite(y, "series")?;
    if y.len() <= cfg.degree + 1 {
        return Err(Error::InvalidArgument(format!(
            "series length {} too short for degree {}",
            y.len(),
            cfg.degree
        )));
    }
    if cfg.retained() == 0 || cfg.burnin >= cfg.iterations {
        return Err(Error::InvalidArgument("no draws retained".into()));
    }
    let n = y.len();
    let op = DifferenceOperator::new(n, cfg.degree)?;
    let mix = OmoriMixture::standard();
    let mut beta = moving_average(y, 2);
    let resid: Vec<f64> = y.iter().zip(&beta).map(|(a, b)| a - b).collect();
    let mut sigma2 = variance(&resid) + 1e-4;
    let log_var = (variance(&op.increments(y)?) + 1e-4).ln();
    let mut dhs = DhsState::initialize(&op.increments(&beta)?, log_var, &mix, rng)?;
    let mut prior = DhsPriorConfig::default();

    let keep = cfg.retained();
    let last_kept = cfg.burnin + keep * cfg.thin;
    let mut out = GaussianDhsDraws {
        beta: Vec::with_capacity(keep),
        sigma_eps: Vec::with_capacity(keep),
        seconds: 0.0,
    };
    let sqrt_n = (n as f64).sqrt();
    let wrap = |iteration: usize, step: &'static str| {
        move |e: Error| Error::Mcmc {
            iteration,
            step,
            source: Box::new(e),
        }
    };

    for it in 0..cfg.iterations {
        let (q, ell) = gaussian_system(y, sigma2, &dhs.h, &op, cfg.init_var).map_err(wrap(it, "trend"))?;
        beta = sample_mvn_canonical(&q, &ell, rng).map_err(wrap(it, "trend"))?;
        let rss: f64 = y.iter().zip(&beta).map(|(a, b)| (a - b).powi(2)).sum();
        sigma2 = sample_obs_variance(rss, n, cfg.obs_shape, cfg.obs_rate, rng);
        prior.sigma_tau = sigma2.sqrt() / sqrt_n;
        let omega = op.increments(&beta).map_err(wrap(it, "shrinkage"))?;
        update_dhs(&omega, &mut dhs, &prior, &mix, rng).map_err(|(step, e)| Error::Mcmc {
            iteration: it,
            step,
            source: Box::new(e),
        })?;
        if it >= cfg.burnin && it < last_kept && (it - cfg.burnin + 1).is_multiple_of(cfg.thin) {
            out.beta.push(beta.clone());
            out.sigma_eps.push(sigma2.sqrt());
        }
    }
    out.seconds = start.elapsed().as_secs_f64();
    Ok(out)
}

/// Count-scale mean from a log(Y + 1) regression: exp(β + σ²/2) - 1.
pub fn log_backmap(beta: f64, sigma_eps_sq: f64) -> f64 {
    (beta + 0.5 * sigma_eps_sq).exp() - 1.0
}
