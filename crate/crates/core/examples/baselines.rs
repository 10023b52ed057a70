//! Comparator fits on one simulated series: simple exponential smoothing,
//! the Gaussian dynamic-shrinkage filter on counts, and the same filter on
//! log(Y + 1) mapped back to the count scale.
//!
//!     cargo run --release --example baselines

use nbbtf::baselines::{exp_smoothing, gaussian_dhs_fit, log_backmap, GaussianDhsConfig};
use nbbtf::sim::{compute_metrics, doppler_trend, rmse, simulate_counts};
use nbbtf::summary::pointwise_bands;
use nbbtf::RngStream;

fn main() -> nbbtf::Result<()> {
    let truth = doppler_trend(200)?;
    let y = simulate_counts(&truth, 1, &mut RngStream::new(5, 0))?;
    let yf: Vec<f64> = y.counts().iter().map(|&c| c as f64).collect();

    let ses = exp_smoothing(&yf)?;
    println!("Exp-Smooth   α = {:.3}  RMSE {:.3}", ses.alpha, rmse(&truth, &ses.level)?);

    let cfg = GaussianDhsConfig {
        iterations: 12_000,
        burnin: 10_000,
        thin: 2,
        ..GaussianDhsConfig::default()
    };
    let gau = gaussian_dhs_fit(&yf, &cfg, &mut RngStream::new(5, 1))?;
    let (med, lo, hi) = pointwise_bands(&gau.beta, 0.95);
    let m = compute_metrics(&truth, &med, &lo, &hi)?;
    let negative = lo.iter().filter(|v| **v < 0.0).count();
    println!(
        "Gau-DHS      RMSE {:.3}  MCIW {:.3}  cov {:.3}  negative lower bounds {negative}",
        m.rmse, m.mciw, m.emp_cov
    );

    let logy: Vec<f64> = yf.iter().map(|v| (v + 1.0).ln()).collect();
    let lg = gaussian_dhs_fit(&logy, &cfg, &mut RngStream::new(5, 2))?;
    let back: Vec<Vec<f64>> = lg
        .beta
        .iter()
        .zip(&lg.sigma_eps)
        .map(|(b, s)| b.iter().map(|v| log_backmap(*v, s * s)).collect())
        .collect();
    let (med, lo, hi) = pointwise_bands(&back, 0.95);
    let m = compute_metrics(&truth, &med, &lo, &hi)?;
    println!(
        "logGau-DHS   RMSE {:.3}  MCIW {:.3}  cov {:.3}",
        m.rmse, m.mciw, m.emp_cov
    );
    Ok(())
}
