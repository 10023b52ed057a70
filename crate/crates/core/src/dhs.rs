//! Dynamic horseshoe shrinkage process on the trend increments.
//!
//! The increments ω_t are conditionally N(0, exp(h_t)), and the log-variances
//! follow an AR(1) around μ with Z(1/2, 1/2) innovations:
//!
//! ```text
//! h_t = μ + φ (h_{t-1} - μ) + η_t,   η_t ~ Z(1/2, 1/2, 0, 1)
//! ```
//!
//! Sampling works on the non-centered states h̃ = h - μ. The Z innovations
//! and the half-Cauchy prior on τ = exp(μ/2) are written as Pólya-Gamma
//! scale mixtures, and log ω² is approximated by a ten-component Gaussian
//! mixture so that h̃ has a tridiagonal Gaussian full conditional.

use std::f64::consts::PI;

use crate::banded::{sample_mvn_canonical, SymBandedMatrix};
use crate::error::{ensure_finite, Error, Result};
use crate::kernels::{categorical_draw, pg_draw, slice_sample, PgParams};
use crate::rng::RngStream;

/// Offset inside log(ω² + c).
pub const C_OFFSET: f64 = 1e-8;

/// Ten-component Gaussian mixture approximation of the log χ²₁ density
/// (Omori, Chib, Shephard and Nakajima, 2007).
#[derive(Debug, Clone, PartialEq)]
pub struct OmoriMixture {
    pub probs: [f64; 10],
    pub means: [f64; 10],
    pub vars: [f64; 10],
}

impl OmoriMixture {
    pub fn standard() -> Self {
        Self {
            probs: [
                0.00609, 0.04775, 0.13057, 0.20674, 0.22715, 0.18842, 0.12047, 0.05591, 0.01575,
                0.00115,
            ],
            means: [
                1.92677, 1.34744, 0.73504, 0.02266, -0.85173, -1.97278, -3.46788, -5.55246,
                -8.68384, -14.65000,
            ],
            vars: [
                0.11265, 0.17788, 0.26768, 0.40611, 0.62699, 0.98583, 1.57469, 2.54498, 4.16591,
                7.33342,
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Normalized component probabilities for one observation
    /// ỹ = m_j + h̃ + μ + N(0, v_j).
    pub fn posterior_probs(&self, y_tilde: f64, h_centered: f64, mu: f64) -> [f64; 10] {
        let mut logw = [0.0; 10];
        for j in 0..10 {
            let r = y_tilde - self.means[j] - h_centered - mu;
            logw[j] = self.probs[j].ln() - 0.5 * self.vars[j].ln() - 0.5 * r * r / self.vars[j];
        }
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut w = logw.map(|l| (l - max).exp());
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        w
    }
}

impl Default for OmoriMixture {
    fn default() -> Self {
        Self::standard()
    }
}

/// Priors of the shrinkage process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhsPriorConfig {
    /// Half-Cauchy scale of the global scale τ.
    pub sigma_tau: f64,
    /// (φ + 1)/2 ~ Beta(phi_a, phi_b).
    pub phi_a: f64,
    pub phi_b: f64,
}

impl DhsPriorConfig {
    pub fn new(sigma_tau: f64) -> Result<Self> {
        if !(sigma_tau > 0.0 && sigma_tau.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma_tau must be positive (got {sigma_tau})"
            )));
        }
        Ok(Self {
            sigma_tau,
            ..Self::default()
        })
    }
}

impl Default for DhsPriorConfig {
    fn default() -> Self {
        Self {
            sigma_tau: 1.0,
            phi_a: 10.0,
            phi_b: 2.0,
        }
    }
}

/// Latent state of the shrinkage process for one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct DhsState {
    /// Log-variances of the increments, length n = T - D.
    pub h: Vec<f64>,
    /// Mean log-variance, μ = log τ².
    pub mu: f64,
    /// AR(1) coefficient of the log-variances, |φ| < 1.
    pub phi: f64,
    pub xi_eta: Vec<f64>,
    pub xi_mu: f64,
    /// Mixture component per increment, 0-based index into [`OmoriMixture`].
    pub s: Vec<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub c_offset: f64,
}

impl DhsState {
    /// Starting state: constant log-variance `log_var`, μ at the same value,
    /// φ at 0.8, auxiliaries at their PG(1, 0) prior mean, and one draw of the
    /// mixture indicators given `omega`.
    pub fn initialize(
        omega: &[f64],
        log_var: f64,
        mix: &OmoriMixture,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::InvalidArgument("no increments to shrink".into()));
        }
        ensure_finite(omega, "increments")?;
        if !log_var.is_finite() {
            return Err(Error::NonFinite("initial log-variance"));
        }
        let n = omega.len();
        let y_tilde = log_squares(omega, C_OFFSET);
        let s = sample_mixture_indicators(&y_tilde, &vec![0.0; n], log_var, mix, rng)?;
        Ok(Self {
            h: vec![log_var; n],
            mu: log_var,
            phi: 0.8,
            xi_eta: vec![0.25; n],
            xi_mu: 0.25,
            s,
            alpha: 0.5,
            beta: 0.5,
            c_offset: C_OFFSET,
        })
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn h_centered(&self) -> Vec<f64> {
        self.h.iter().map(|h| h - self.mu).collect()
    }
}

/// ỹ_t = log(ω_t² + c).
pub fn log_squares(omega: &[f64], c_offset: f64) -> Vec<f64> {
    omega.iter().map(|w| (w * w + c_offset).ln()).collect()
}

/// Draws each mixture indicator from its categorical full conditional.
pub fn sample_mixture_indicators(
    y_tilde: &[f64],
    h_centered: &[f64],
    mu: f64,
    mix: &OmoriMixture,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    if y_tilde.len() != h_centered.len() {
        return Err(Error::DimensionMismatch {
            expected: y_tilde.len(),
            got: h_centered.len(),
        });
    }
    ensure_finite(y_tilde, "log squared increments")?;
    ensure_finite(h_centered, "centered log-variances")?;
    if !mu.is_finite() {
        return Err(Error::NonFinite("mu"));
    }
    y_tilde
        .iter()
        .zip(h_centered)
        .map(|(&y, &h)| categorical_draw(&mix.posterior_probs(y, h, mu), rng))
        .collect()
}

/// Tridiagonal precision and linear term of the centered log-volatility
/// full conditional.
pub fn log_vol_system(
    y_tilde: &[f64],
    s: &[usize],
    xi_eta: &[f64],
    phi: f64,
    mu: f64,
    mix: &OmoriMixture,
) -> Result<(SymBandedMatrix, Vec<f64>)> {
    let n = y_tilde.len();
    for got in [s.len(), xi_eta.len()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    let mut q = SymBandedMatrix::zeros(n, 1);
    let mut ell = Vec::with_capacity(n);
    for t in 0..n {
        let v = mix.vars[s[t]];
        let next = if t + 1 < n { phi * phi * xi_eta[t + 1] } else { 0.0 };
        q.add(t, t, 1.0 / v + xi_eta[t] + next);
        if t > 0 {
            q.add(t, t - 1, -phi * xi_eta[t]);
        }
        ell.push((y_tilde[t] - mix.means[s[t]] - mu) / v);
    }
    Ok((q, ell))
}

/// Joint draw of all log-volatilities given the increments; returns h = h̃ + μ.
pub fn sample_log_vols(
    omega: &[f64],
    state: &DhsState,
    mix: &OmoriMixture,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if omega.len() != state.len() || omega.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: state.len(),
            got: omega.len(),
        });
    }
    ensure_finite(omega, "increments")?;
    let y_tilde = log_squares(omega, state.c_offset);
    let (q, ell) = log_vol_system(&y_tilde, &state.s, &state.xi_eta, state.phi, state.mu, mix)?;
    let h_centered = sample_mvn_canonical(&q, &ell, rng)?;
    Ok(h_centered.into_iter().map(|x| x + state.mu).collect())
}

/// Innovations η₁ = h̃₁, η_t = h̃_t - φ h̃_{t-1}.
pub fn innovations(h: &[f64], mu: f64, phi: f64) -> Vec<f64> {
    (0..h.len())
        .map(|t| {
            let cur = h[t] - mu;
            if t == 0 {
                cur
            } else {
                cur - phi * (h[t - 1] - mu)
            }
        })
        .collect()
}

/// ξ^η_t ~ PG(1, η_t).
pub fn sample_xi_eta(h: &[f64], mu: f64, phi: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    if !(phi.abs() < 1.0) {
        return Err(Error::InvalidArgument(format!("|phi| must be < 1 (got {phi})")));
    }
    ensure_finite(h, "log-variances")?;
    innovations(h, mu, phi)
        .into_iter()
        .map(|eta| pg_draw(PgParams::new(1, eta)?, rng))
        .collect()
}

/// Precision Q_μ and linear term ℓ_μ of the μ full conditional.
pub fn mu_conditional(
    h: &[f64],
    phi: f64,
    xi_eta: &[f64],
    xi_mu: f64,
    sigma_tau: f64,
) -> Result<(f64, f64)> {
    if h.len() != xi_eta.len() || h.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: h.len(),
            got: xi_eta.len(),
        });
    }
    if !(sigma_tau > 0.0) {
        return Err(Error::InvalidArgument("sigma_tau must be positive".into()));
    }
    let prior_mean = (sigma_tau * sigma_tau).ln();
    let one_minus = 1.0 - phi;
    let mut q = xi_mu + xi_eta[0];
    let mut ell = xi_mu * prior_mean + xi_eta[0] * h[0];
    for t in 1..h.len() {
        q += one_minus * one_minus * xi_eta[t];
        ell += xi_eta[t] * one_minus * (h[t] - phi * h[t - 1]);
    }
    Ok((q, ell))
}

/// Draws μ from its Gaussian full conditional, then refreshes
/// ξ^μ ~ PG(1, μ - log σ_τ²). Returns (μ, ξ^μ).
pub fn sample_mu(
    h: &[f64],
    phi: f64,
    xi_eta: &[f64],
    xi_mu: f64,
    sigma_tau: f64,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    let (q, ell) = mu_conditional(h, phi, xi_eta, xi_mu, sigma_tau)?;
    if !(q > 0.0) || !ell.is_finite() {
        return Err(Error::NonFinite("mu full conditional"));
    }
    let mu = ell / q + rng.std_normal() / q.sqrt();
    let xi_mu = pg_draw(PgParams::new(1, mu - (sigma_tau * sigma_tau).ln())?, rng)?;
    Ok((mu, xi_mu))
}

/// Log full conditional of φ up to a constant, -inf outside (-1, 1).
pub fn phi_log_conditional(
    phi: f64,
    h_centered: &[f64],
    xi_eta: &[f64],
    prior: &DhsPriorConfig,
) -> f64 {
    if !(phi > -1.0 && phi < 1.0) {
        return f64::NEG_INFINITY;
    }
    let mut lp = (prior.phi_a - 1.0) * ((phi + 1.0) / 2.0).ln()
        + (prior.phi_b - 1.0) * ((1.0 - phi) / 2.0).ln();
    for t in 1..h_centered.len() {
        let r = h_centered[t] - phi * h_centered[t - 1];
        lp += 0.5 * (xi_eta[t] / (2.0 * PI)).ln() - 0.5 * xi_eta[t] * r * r;
    }
    lp
}

/// One slice-sampling update of φ on (-1, 1) starting from `phi`.
pub fn sample_phi(
    h: &[f64],
    mu: f64,
    xi_eta: &[f64],
    phi: f64,
    prior: &DhsPriorConfig,
    rng: &mut RngStream,
) -> Result<f64> {
    if h.len() != xi_eta.len() {
        return Err(Error::DimensionMismatch {
            expected: h.len(),
            got: xi_eta.len(),
        });
    }
    ensure_finite(h, "log-variances")?;
    let h_centered: Vec<f64> = h.iter().map(|x| x - mu).collect();
    slice_sample(
        |p| phi_log_conditional(p, &h_centered, xi_eta, prior),
        phi,
        (-1.0, 1.0),
        rng,
    )
}

/// Shrinkage proportions κ_t = 1 / (1 + exp(h_t)).
pub fn shrinkage_profile(h: &[f64]) -> Vec<f64> {
    h.iter().map(|x| 1.0 / (1.0 + x.exp())).collect()
}

/// One sweep over the shrinkage block in the order indicators, log-volatilities,
/// innovation auxiliaries, φ, then μ with its auxiliary.
///
/// On failure returns the name of the failing step with the error.
pub fn update_dhs(
    omega: &[f64],
    state: &mut DhsState,
    prior: &DhsPriorConfig,
    mix: &OmoriMixture,
    rng: &mut RngStream,
) -> std::result::Result<(), (&'static str, Error)> {
    let y_tilde = log_squares(omega, state.c_offset);
    state.s = sample_mixture_indicators(&y_tilde, &state.h_centered(), state.mu, mix, rng)
        .map_err(|e| ("mixture-indicators", e))?;
    state.h = sample_log_vols(omega, state, mix, rng).map_err(|e| ("volatility", e))?;
    state.xi_eta =
        sample_xi_eta(&state.h, state.mu, state.phi, rng).map_err(|e| ("volatility-auxiliaries", e))?;
    state.phi = sample_phi(&state.h, state.mu, &state.xi_eta, state.phi, prior, rng)
        .map_err(|e| ("autocorrelation", e))?;
    // μ moves while h stays fixed, so the centered states shift with it
    let (mu, xi_mu) = sample_mu(
        &state.h,
        state.phi,
        &state.xi_eta,
        state.xi_mu,
        prior.sigma_tau,
        rng,
    )
    .map_err(|e| ("average-volatility", e))?;
    state.mu = mu;
    state.xi_mu = xi_mu;
    Ok(())
}
