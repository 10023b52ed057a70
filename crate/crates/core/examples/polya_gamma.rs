//! Pólya-Gamma draws against their closed-form moments, plus a slice
//! sampler run on a Beta(10, 2) target.
//!
//!     cargo run --release --example polya_gamma

use nbbtf::kernels::{pg_draw, slice_sample, PgParams};
use nbbtf::RngStream;

fn main() -> nbbtf::Result<()> {
    let mut rng = RngStream::new(7, 0);
    let n = 50_000;

    println!("{:>4} {:>6} {:>10} {:>10} {:>10}", "b", "c", "mean", "exact", "4·SE");
    for b in [1u64, 2, 5, 20] {
        for c in [0.0, 0.5, 2.0, 8.0] {
            let p = PgParams::new(b, c)?;
            let mut sum = 0.0;
            for _ in 0..n {
                sum += pg_draw(p, &mut rng)?;
            }
            let se = (p.variance() / n as f64).sqrt();
            println!(
                "{b:>4} {c:>6.1} {:>10.5} {:>10.5} {:>10.5}",
                sum / n as f64,
                p.mean(),
                4.0 * se
            );
        }
    }

    // unnormalized Beta(10, 2) log density
    let log_beta = |x: f64| 9.0 * x.ln() + (1.0 - x).ln();
    let mut x = 0.5;
    let mut acc = 0.0;
    for _ in 0..n {
        x = slice_sample(log_beta, x, (0.0, 1.0), &mut rng)?;
        acc += x;
    }
    println!("\nslice sampler Beta(10,2): mean {:.4} (exact {:.4})", acc / n as f64, 10.0 / 12.0);
    Ok(())
}
