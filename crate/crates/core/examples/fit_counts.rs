//! Fit the negative binomial trend filter to a simulated series and print
//! the trend, intervals and the shrinkage profile at a few time points.
//!
//!     cargo run --release --example fit_counts

use nbbtf::sim::{doppler_trend, simulate_counts};
use nbbtf::{posterior_summary, run_mcmc, ModelConfig, RngStream};

fn main() -> nbbtf::Result<()> {
    let truth = doppler_trend(200)?;
    let y = simulate_counts(&truth, 10, &mut RngStream::new(1, 0))?;

    let cfg = ModelConfig {
        iterations: 12_000,
        burnin: 10_000,
        thin: 2,
        ..ModelConfig::default()
    };
    let draws = run_mcmc(&y, &cfg, &mut RngStream::new(cfg.seed, 0))?;
    let s = posterior_summary(&draws, 0.95)?;

    let mut rs = draws.r.clone();
    rs.sort_unstable();
    println!(
        "{} draws in {:.1}s, r median {}, r acceptance {:.2}",
        draws.n_draws(),
        draws.seconds,
        rs[rs.len() / 2],
        draws.accept_rate.unwrap_or(f64::NAN)
    );
    println!("unshrunk increments: {}/{}", s.unshrunk_count, s.n_increments);
    println!("\n{:>4} {:>4} {:>7} {:>7} {:>15} {:>9} {:>6}", "t", "y", "truth", "median", "95% CI", "pred", "κ");
    for t in (0..200).step_by(10) {
        let p = &s.points[t];
        println!(
            "{:>4} {:>4} {:>7.2} {:>7.2} [{:>5.2}, {:>5.2}] [{:>2}, {:>3}] {:>6}",
            t + 1,
            y.counts()[t],
            truth[t],
            p.trend_median,
            p.ci_lo,
            p.ci_hi,
            p.pred_lo,
            p.pred_hi,
            p.kappa_median.map_or("NA".into(), |k| format!("{k:.2}"))
        );
    }
    Ok(())
}
