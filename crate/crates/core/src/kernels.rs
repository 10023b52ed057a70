//! Random-variate kernels shared by every Gibbs step.
//!
//! Pólya-Gamma draws use the exact alternating-series accept/reject sampler
//! for PG(1, c); integer shapes are handled as sums of independent PG(1, c)
//! draws, so the cost of a draw is linear in its shape.

use std::f64::consts::{FRAC_2_PI, PI};

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Truncation point splitting the two envelope pieces of the J* density.
const TRUNC: f64 = 0.64;

/// Shapes above this emit a runtime warning.
const LARGE_SHAPE: u64 = 10_000;

/// Parameters of a Pólya-Gamma distribution PG(b, c) with integer shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgParams {
    pub b: u64,
    pub c: f64,
}

impl PgParams {
    pub fn new(b: u64, c: f64) -> Result<Self> {
        if b == 0 {
            return Err(Error::InvalidArgument(
                "Pólya-Gamma shape must be a positive integer".into(),
            ));
        }
        if !c.is_finite() {
            return Err(Error::NonFinite("Pólya-Gamma tilt"));
        }
        Ok(Self { b, c })
    }

    /// Analytic mean (b / 2c) tanh(c / 2), with the limit b/4 at c = 0.
    pub fn mean(&self) -> f64 {
        let c = self.c.abs();
        let b = self.b as f64;
        if c < 1e-6 {
            b * (0.25 - c * c / 48.0)
        } else {
            b / (2.0 * c) * (c / 2.0).tanh()
        }
    }

    /// Analytic variance b (sinh c - c) / (4 c^3 cosh^2(c/2)), b/24 at c = 0.
    pub fn variance(&self) -> f64 {
        let c = self.c.abs();
        let b = self.b as f64;
        if c < 1e-3 {
            b * (1.0 / 24.0 - c * c / 240.0)
        } else {
            let ch = (c / 2.0).cosh();
            b * (c.sinh() - c) / (4.0 * c.powi(3) * ch * ch)
        }
    }
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// n-th coefficient of the alternating series for the J*(1, z) density.
fn series_coef(n: u32, x: f64) -> f64 {
    let k = (n as f64 + 0.5) * PI;
    if x > TRUNC {
        k * (-0.5 * k * k * x).exp()
    } else if x > 0.0 {
        let half = n as f64 + 0.5;
        let log_term = 1.5 * (FRAC_2_PI / x).ln() + k.ln() - 2.0 * half * half / x;
        log_term.exp()
    } else {
        0.0
    }
}

/// Probability that the proposal comes from the truncated exponential piece.
fn exponential_piece_mass(z: f64, fz: f64) -> f64 {
    let root = (1.0 / TRUNC).sqrt();
    let b = root * (TRUNC * z - 1.0);
    let a = -root * (TRUNC * z + 1.0);
    let x0 = fz.ln() + fz * TRUNC;
    let xb = x0 - z + std_normal_cdf(b).ln();
    let xa = x0 + z + std_normal_cdf(a).ln();
    let q_over_p = 4.0 / PI * (xb.exp() + xa.exp());
    1.0 / (1.0 + q_over_p)
}

/// Inverse-Gaussian IG(1/z, 1) draw truncated to (0, TRUNC).
fn truncated_inverse_gaussian(z: f64, rng: &mut RngStream) -> f64 {
    let mu = if z > 0.0 { 1.0 / z } else { f64::INFINITY };
    if mu > TRUNC {
        loop {
            let (mut e1, mut e2) = (rng.exp1(), rng.exp1());
            while e1 * e1 > 2.0 * e2 / TRUNC {
                e1 = rng.exp1();
                e2 = rng.exp1();
            }
            let x = TRUNC / ((1.0 + TRUNC * e1) * (1.0 + TRUNC * e1));
            let alpha = (-0.5 * z * z * x).exp();
            if rng.uniform() <= alpha {
                return x;
            }
        }
    } else {
        loop {
            let y = rng.std_normal().powi(2);
            let my = mu * y;
            let mut x = mu + 0.5 * mu * my - 0.5 * mu * (4.0 * my + my * my).sqrt();
            if rng.uniform() > mu / (mu + x) {
                x = mu * mu / x;
            }
            if x < TRUNC {
                return x;
            }
        }
    }
}

/// One exact PG(1, c) draw.
fn pg_one(c: f64, rng: &mut RngStream) -> f64 {
    let z = 0.5 * c.abs();
    let fz = 0.125 * PI * PI + 0.5 * z * z;
    let p_exp = exponential_piece_mass(z, fz);
    loop {
        let x = if rng.uniform() < p_exp {
            TRUNC + rng.exp1() / fz
        } else {
            truncated_inverse_gaussian(z, rng)
        };
        let mut s = series_coef(0, x);
        let y = rng.uniform() * s;
        let mut n = 0u32;
        loop {
            n += 1;
            if n % 2 == 1 {
                s -= series_coef(n, x);
                if y <= s {
                    return 0.25 * x;
                }
            } else {
                s += series_coef(n, x);
                if y > s {
                    break;
                }
            }
        }
    }
}

/// Exact PG(b, c) draw as the sum of `b` independent PG(1, c) draws.
pub fn pg_draw(p: PgParams, rng: &mut RngStream) -> Result<f64> {
    if p.b == 0 {
        return Err(Error::InvalidArgument(
            "Pólya-Gamma shape must be a positive integer".into(),
        ));
    }
    if !p.c.is_finite() {
        return Err(Error::NonFinite("Pólya-Gamma tilt"));
    }
    if p.b > LARGE_SHAPE {
        log::warn!(
            "Pólya-Gamma shape {} exceeds {}; draw cost is linear in the shape",
            p.b,
            LARGE_SHAPE
        );
    }
    Ok((0..p.b).map(|_| pg_one(p.c, rng)).sum())
}

/// One stepping-out/shrinkage slice-sampling update of `x0` targeting the
/// (unnormalized) density `exp(log_density)` restricted to `bounds`.
///
/// The initial bracket has width 1; stepping out is unlimited and clipped at
/// the bounds. Use infinite bounds for unrestricted supports.
pub fn slice_sample<F>(
    mut log_density: F,
    x0: f64,
    bounds: (f64, f64),
    rng: &mut RngStream,
) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    const WIDTH: f64 = 1.0;
    let (lo, hi) = bounds;
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(Error::InvalidArgument(format!(
            "degenerate slice interval ({lo}, {hi})"
        )));
    }
    if !(x0 > lo && x0 < hi) {
        return Err(Error::InvalidArgument(format!(
            "slice start {x0} not strictly inside ({lo}, {hi})"
        )));
    }
    let f0 = log_density(x0);
    if f0.is_nan() || f0 == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument(
            "log density is -inf or NaN at the starting point".into(),
        ));
    }
    let level = f0 + rng.uniform_open().ln();

    let mut left = (x0 - rng.uniform() * WIDTH).max(lo);
    let mut right = (left + WIDTH).min(hi);
    while left > lo && log_density(left) > level {
        left = (left - WIDTH).max(lo);
    }
    while right < hi && log_density(right) > level {
        right = (right + WIDTH).min(hi);
    }

    loop {
        let x1 = left + rng.uniform() * (right - left);
        if x1 > lo && x1 < hi && log_density(x1) > level {
            return Ok(x1);
        }
        if x1 < x0 {
            left = x1;
        } else {
            right = x1;
        }
        if right - left <= f64::EPSILON * x0.abs().max(1.0) {
            // bracket collapsed onto the current point
            return Ok(x0);
        }
    }
}

/// Uniform draw on the integers {lo, ..., hi}.
pub fn discrete_uniform_draw(lo: i64, hi: i64, rng: &mut RngStream) -> Result<i64> {
    if lo > hi {
        return Err(Error::InvalidArgument(format!(
            "empty integer range {lo}..={hi}"
        )));
    }
    Ok(rng.int_inclusive(lo, hi))
}

/// Index `j` drawn with probability `weights[j] / sum(weights)`.
pub fn categorical_draw(weights: &[f64], rng: &mut RngStream) -> Result<usize> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidArgument(
            "categorical weights must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument(
            "categorical weights are all zero".into(),
        ));
    }
    let target = rng.uniform() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = j;
            acc += w;
            if target < acc {
                return Ok(j);
            }
        }
    }
    Ok(last_positive)
}
