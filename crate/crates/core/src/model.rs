//! Negative binomial observation layer and the outer Gibbs sampler.
//!
//! Y_t | θ_t, r ~ NB(r, e^θ_t / (r + e^θ_t)), so E[Y_t] = e^θ_t and
//! var(Y_t) = e^θ_t (1 + e^θ_t / r). The D-th differences of θ carry the
//! dynamic horseshoe prior; the first D states get a fixed N(0, init_var)
//! prior.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::banded::{cholesky_banded, sample_with_factor, DifferenceOperator, SymBandedMatrix};
use crate::dhs::{shrinkage_profile, update_dhs, DhsPriorConfig, DhsState, OmoriMixture};
use crate::error::{ensure_finite, Error, Result};
use crate::kernels::{discrete_uniform_draw, pg_draw, PgParams};
use crate::rng::RngStream;

/// Observed counts with optional time labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSeries {
    y: Vec<u64>,
    labels: Option<Vec<String>>,
}

impl CountSeries {
    pub fn new(y: Vec<u64>) -> Self {
        Self { y, labels: None }
    }

    pub fn with_labels(y: Vec<u64>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                got: labels.len(),
            });
        }
        Ok(Self {
            y,
            labels: Some(labels),
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.y
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Label of time point `t`, falling back to the 1-based index.
    pub fn label(&self, t: usize) -> String {
        match &self.labels {
            Some(l) => l[t].clone(),
            None => (t + 1).to_string(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Sampler and prior settings of the negative binomial trend filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Differencing degree D.
    pub degree: usize,
    /// Half-Cauchy scale of the global shrinkage scale.
    pub sigma_tau: f64,
    /// Holds r fixed (e.g. 1000 for a Poisson-like fit) and skips its update.
    pub r_fixed: Option<u64>,
    /// Mean of the Poisson prior on r.
    pub r_prior_mean: f64,
    /// Half-width of the integer random-walk proposal for r.
    pub mh_step: u64,
    /// Prior variance of the first D states.
    pub init_var: f64,
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            degree: 2,
            sigma_tau: 1.0,
            r_fixed: None,
            r_prior_mean: 10.0,
            mh_step: 1,
            init_var: 100.0,
            iterations: 105_000,
            burnin: 100_000,
            thin: 5,
            seed: 20_240_901,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(1..=3).contains(&self.degree) {
            return bad(format!("degree must be 1, 2 or 3 (got {})", self.degree));
        }
        if !(self.sigma_tau > 0.0 && self.sigma_tau.is_finite()) {
            return bad(format!("sigma_tau must be positive (got {})", self.sigma_tau));
        }
        if self.r_fixed == Some(0) {
            return bad("r_fixed must be at least 1".into());
        }
        if !(self.r_prior_mean > 0.0) {
            return bad("r_prior_mean must be positive".into());
        }
        if self.mh_step == 0 {
            return bad("mh_step must be at least 1".into());
        }
        if !(self.init_var > 0.0) {
            return bad("init_var must be positive".into());
        }
        if self.thin == 0 {
            return bad("thin must be at least 1".into());
        }
        if self.burnin >= self.iterations {
            return bad(format!(
                "burnin ({}) must be smaller than iterations ({})",
                self.burnin, self.iterations
            ));
        }
        if self.retained() == 0 {
            return bad("no draws retained after burnin and thinning".into());
        }
        Ok(())
    }

    /// Number of retained draws; a trailing partial thinning block is dropped.
    pub fn retained(&self) -> usize {
        if self.thin == 0 || self.iterations <= self.burnin {
            0
        } else {
            (self.iterations - self.burnin) / self.thin
        }
    }
}

/// One full configuration of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct FitState {
    pub theta: Vec<f64>,
    pub xi_theta: Vec<f64>,
    pub r: u64,
    pub dhs: DhsState,
}

/// Cumulative wall-clock seconds per sampler step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepTimings {
    pub overdispersion: f64,
    pub trend: f64,
    pub trend_auxiliaries: f64,
    pub shrinkage: f64,
}

/// Retained post-burnin, thinned draws.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub degree: usize,
    pub theta: Vec<Vec<f64>>,
    pub r: Vec<u64>,
    pub phi: Vec<f64>,
    pub mu: Vec<f64>,
    pub h: Vec<Vec<f64>>,
    pub kappa: Vec<Vec<f64>>,
    pub y_rep: Vec<Vec<u64>>,
    pub seconds: f64,
    /// Acceptance rate of the r moves; `None` when r is fixed.
    pub accept_rate: Option<f64>,
    pub iterations: usize,
    pub timings: StepTimings,
}

impl PosteriorDraws {
    pub fn n_draws(&self) -> usize {
        self.theta.len()
    }

    pub fn series_len(&self) -> usize {
        self.theta.first().map_or(0, Vec::len)
    }

    /// Trend on the count scale, e^θ, per retained draw.
    pub fn trend(&self) -> Vec<Vec<f64>> {
        self.theta
            .iter()
            .map(|row| row.iter().map(|t| t.exp()).collect())
            .collect()
    }
}

/// log(1 + e^x) without overflow.
fn ln_1p_exp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Full negative binomial log-likelihood, normalizing constants included.
pub fn nb_loglik(y: &[u64], theta: &[f64], r: u64) -> Result<f64> {
    if r < 1 {
        return Err(Error::InvalidArgument("overdispersion r must be >= 1".into()));
    }
    if y.len() != theta.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: theta.len(),
        });
    }
    let rf = r as f64;
    let log_r = rf.ln();
    let lg_r = ln_gamma(rf);
    Ok(y.iter()
        .zip(theta)
        .map(|(&yt, &th)| {
            let yf = yt as f64;
            let psi = th - log_r;
            ln_gamma(yf + rf) - lg_r - ln_gamma(yf + 1.0) + yf * psi - (yf + rf) * ln_1p_exp(psi)
        })
        .sum())
}

/// ξ^θ_t ~ PG(Y_t + r, θ_t - log r).
pub fn sample_xi_theta(
    y: &[u64],
    theta: &[f64],
    r: u64,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if r < 1 {
        return Err(Error::InvalidArgument("overdispersion r must be >= 1".into()));
    }
    if y.len() != theta.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: theta.len(),
        });
    }
    let log_r = (r as f64).ln();
    y.iter()
        .zip(theta)
        .map(|(&yt, &th)| pg_draw(PgParams::new(yt + r, th - log_r)?, rng))
        .collect()
}

/// Prior precision weights of (θ₁…θ_D, ω): 1/init_var, then e^{-h}.
fn increment_weights(degree: usize, init_var: f64, h: &[f64]) -> Vec<f64> {
    std::iter::repeat_n(1.0 / init_var, degree)
        .chain(h.iter().map(|x| (-x).exp()))
        .collect()
}

/// Banded precision Q_θ = diag(ξ) + Dᵀ Σ_ω⁻¹ D and linear term
/// ℓ_t = ξ_t log r + (Y_t - r)/2 of the trend full conditional.
pub fn theta_system(
    y: &[u64],
    r: u64,
    xi_theta: &[f64],
    h: &[f64],
    op: &DifferenceOperator,
    init_var: f64,
) -> Result<(SymBandedMatrix, Vec<f64>)> {
    let t_len = op.len();
    for got in [y.len(), xi_theta.len(), h.len() + op.degree()] {
        if got != t_len {
            return Err(Error::DimensionMismatch {
                expected: t_len,
                got,
            });
        }
    }
    let mut q = op.weighted_gram(&increment_weights(op.degree(), init_var, h))?;
    q.add_diagonal(xi_theta);
    let log_r = (r as f64).ln();
    let rf = r as f64;
    let ell = y
        .iter()
        .zip(xi_theta)
        .map(|(&yt, &xi)| xi * log_r + 0.5 * (yt as f64 - rf))
        .collect();
    Ok((q, ell))
}

/// Ridge added once to the diagonal when the trend precision fails to factor.
const THETA_RIDGE: f64 = 1e-8;

/// Joint draw of the latent log-mean θ given ξ^θ, r and the log-volatilities.
pub fn sample_theta(
    y: &[u64],
    r: u64,
    xi_theta: &[f64],
    h: &[f64],
    op: &DifferenceOperator,
    init_var: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let (mut q, ell) = theta_system(y, r, xi_theta, h, op, init_var)?;
    let chol = match cholesky_banded(&q) {
        Ok(c) => c,
        Err(Error::NotPositiveDefinite { index, pivot }) => {
            log::warn!(
                "trend precision not positive definite at {index} (pivot {pivot}); retrying with ridge {THETA_RIDGE}"
            );
            q.add_diagonal(&vec![THETA_RIDGE; q.dim()]);
            cholesky_banded(&q)?
        }
        Err(e) => return Err(e),
    };
    sample_with_factor(&chol, &ell, rng)
}

fn log_poisson_prior(r: u64, mean: f64) -> f64 {
    let rf = r as f64;
    rf * mean.ln() - mean - ln_gamma(rf + 1.0)
}

/// Number of integers in the proposal grid around `r`.
fn proposal_support(r: u64, step: u64) -> u64 {
    r + step - r.saturating_sub(step).max(1) + 1
}

/// Log Metropolis-Hastings ratio for moving r → r* under the truncated
/// Poisson prior, including the Hastings correction for the proposal grid
/// being clipped at 1.
pub fn r_log_acceptance(
    y: &[u64],
    theta: &[f64],
    r: u64,
    proposal: u64,
    step: u64,
    prior_mean: f64,
) -> Result<f64> {
    let target = |v: u64| -> Result<f64> { Ok(nb_loglik(y, theta, v)? + log_poisson_prior(v, prior_mean)) };
    let hastings = (proposal_support(r, step) as f64).ln() - (proposal_support(proposal, step) as f64).ln();
    Ok(target(proposal)? - target(r)? + hastings)
}

/// One integer random-walk Metropolis-Hastings update of r. Returns the
/// retained value and whether the proposal was accepted.
pub fn sample_r(
    y: &[u64],
    theta: &[f64],
    r: u64,
    step: u64,
    prior_mean: f64,
    rng: &mut RngStream,
) -> Result<(u64, bool)> {
    if r < 1 || step < 1 {
        return Err(Error::InvalidArgument(
            "r and the proposal step must be >= 1".into(),
        ));
    }
    let lo = r.saturating_sub(step).max(1) as i64;
    let hi = (r + step) as i64;
    let proposal = discrete_uniform_draw(lo, hi, rng)? as u64;
    let log_alpha = r_log_acceptance(y, theta, r, proposal, step, prior_mean)?;
    if log_alpha >= 0.0 || rng.uniform_open().ln() < log_alpha {
        Ok((proposal, true))
    } else {
        Ok((r, false))
    }
}

/// Centered moving average with the window truncated at the ends.
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

fn sample_variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Starting configuration of the chain.
pub fn init_state(y: &CountSeries, cfg: &ModelConfig, rng: &mut RngStream) -> Result<FitState> {
    cfg.validate()?;
    let counts = y.counts();
    if counts.len() < cfg.degree + 2 {
        return Err(Error::InvalidArgument(format!(
            "series length {} is too short for differencing degree {} (need at least {})",
            counts.len(),
            cfg.degree,
            cfg.degree + 2
        )));
    }
    let op = DifferenceOperator::new(counts.len(), cfg.degree)?;
    let log_y: Vec<f64> = counts.iter().map(|&c| (c as f64 + 1.0).ln()).collect();
    let theta = moving_average(&log_y, 2);
    let r = cfg.r_fixed.unwrap_or_else(|| cfg.r_prior_mean.round().max(1.0) as u64);
    let log_r = (r as f64).ln();
    let xi_theta = counts
        .iter()
        .zip(&theta)
        .map(|(&c, &th)| Ok(PgParams::new(c + r, th - log_r)?.mean()))
        .collect::<Result<Vec<f64>>>()?;
    let log_var = (sample_variance(&op.increments(&log_y)?) + 1e-4).ln();
    let dhs = DhsState::initialize(
        &op.increments(&theta)?,
        log_var,
        &OmoriMixture::standard(),
        rng,
    )?;
    Ok(FitState {
        theta,
        xi_theta,
        r,
        dhs,
    })
}

fn step_err(iteration: usize, step: &'static str) -> impl FnOnce(Error) -> Error {
    move |e| Error::Mcmc {
        iteration,
        step,
        source: Box::new(e),
    }
}

/// NB(r, p) draw with mean `mean`, as a Poisson-Gamma mixture.
pub(crate) fn nb_draw(mean: f64, r: u64, rng: &mut RngStream) -> u64 {
    let rate = rng.gamma(r as f64, mean / r as f64);
    rng.poisson(rate)
}

/// Runs the full Gibbs sampler and returns the retained draws.
///
/// Per iteration: r (unless fixed), θ, ξ^θ, then the shrinkage block.
/// Whenever r moves, ξ^θ is refreshed before the θ update so that θ is
/// drawn from the augmented conditional of the current r.
pub fn run_mcmc(y: &CountSeries, cfg: &ModelConfig, rng: &mut RngStream) -> Result<PosteriorDraws> {
    let start = Instant::now();
    let mut state = init_state(y, cfg, rng)?;
    let counts = y.counts();
    let op = DifferenceOperator::new(counts.len(), cfg.degree)?;
    let prior = DhsPriorConfig::new(cfg.sigma_tau)?;
    let mix = OmoriMixture::standard();

    let keep = cfg.retained();
    let mut draws = PosteriorDraws {
        degree: cfg.degree,
        theta: Vec::with_capacity(keep),
        r: Vec::with_capacity(keep),
        phi: Vec::with_capacity(keep),
        mu: Vec::with_capacity(keep),
        h: Vec::with_capacity(keep),
        kappa: Vec::with_capacity(keep),
        y_rep: Vec::with_capacity(keep),
        seconds: 0.0,
        accept_rate: None,
        iterations: cfg.iterations,
        timings: StepTimings::default(),
    };
    let mut accepted = 0usize;
    let mut proposed = 0usize;
    let last_kept = cfg.burnin + keep * cfg.thin;

    for it in 0..cfg.iterations {
        if cfg.r_fixed.is_none() {
            let t0 = Instant::now();
            let (r, acc) = sample_r(
                counts,
                &state.theta,
                state.r,
                cfg.mh_step,
                cfg.r_prior_mean,
                rng,
            )
            .map_err(step_err(it, "overdispersion"))?;
            proposed += 1;
            if acc {
                accepted += 1;
            }
            let moved = r != state.r;
            state.r = r;
            draws.timings.overdispersion += t0.elapsed().as_secs_f64();
            if moved {
                let t0 = Instant::now();
                state.xi_theta = sample_xi_theta(counts, &state.theta, state.r, rng)
                    .map_err(step_err(it, "trend-auxiliaries"))?;
                draws.timings.trend_auxiliaries += t0.elapsed().as_secs_f64();
            }
        }

        let t0 = Instant::now();
        state.theta = sample_theta(
            counts,
            state.r,
            &state.xi_theta,
            &state.dhs.h,
            &op,
            cfg.init_var,
            rng,
        )
        .map_err(step_err(it, "trend"))?;
        ensure_finite(&state.theta, "trend").map_err(step_err(it, "trend"))?;
        draws.timings.trend += t0.elapsed().as_secs_f64();

        let t0 = Instant::now();
        state.xi_theta = sample_xi_theta(counts, &state.theta, state.r, rng)
            .map_err(step_err(it, "trend-auxiliaries"))?;
        draws.timings.trend_auxiliaries += t0.elapsed().as_secs_f64();

        let t0 = Instant::now();
        let omega = op.increments(&state.theta).map_err(step_err(it, "shrinkage"))?;
        update_dhs(&omega, &mut state.dhs, &prior, &mix, rng).map_err(|(step, e)| Error::Mcmc {
            iteration: it,
            step,
            source: Box::new(e),
        })?;
        draws.timings.shrinkage += t0.elapsed().as_secs_f64();

        if it >= cfg.burnin && it < last_kept && (it - cfg.burnin + 1).is_multiple_of(cfg.thin) {
            let y_rep = state
                .theta
                .iter()
                .map(|th| nb_draw(th.exp(), state.r, rng))
                .collect();
            draws.theta.push(state.theta.clone());
            draws.r.push(state.r);
            draws.phi.push(state.dhs.phi);
            draws.mu.push(state.dhs.mu);
            draws.kappa.push(shrinkage_profile(&state.dhs.h));
            draws.h.push(state.dhs.h.clone());
            draws.y_rep.push(y_rep);
        }
    }

    draws.accept_rate = (proposed > 0).then(|| accepted as f64 / proposed as f64);
    draws.seconds = start.elapsed().as_secs_f64();
    Ok(draws)
}
