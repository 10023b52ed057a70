//! Canonical-form Gaussian draws from a banded precision matrix, and the
//! difference operator that builds the trend filter's prior precision.
//!
//!     cargo run --release --example banded_sampler

use nbbtf::banded::{cholesky_banded, sample_with_factor, DifferenceOperator, SymBandedMatrix};
use nbbtf::RngStream;

fn main() -> nbbtf::Result<()> {
    // second differences of a 6-point series
    let op = DifferenceOperator::new(6, 2)?;
    let theta = [1.0, 2.0, 4.0, 7.0, 11.0, 16.0];
    println!("θ          = {theta:?}");
    println!("D θ        = {:?}", op.apply(&theta)?);
    println!("recovered  = {:?}", op.invert(&op.apply(&theta)?)?);

    // Q = diag(1) + Dᵀ W D has bandwidth 2
    let mut q: SymBandedMatrix = op.weighted_gram(&[0.01, 0.01, 4.0, 4.0, 4.0, 4.0])?;
    q.add_diagonal(&[1.0; 6]);
    let ell = [0.5, -1.0, 2.0, 0.0, 1.0, 3.0];
    let chol = cholesky_banded(&q)?;
    let mean = chol.solve(&ell);

    let mut rng = RngStream::new(11, 0);
    let n = 100_000;
    let mut acc = [0.0; 6];
    for _ in 0..n {
        let x = sample_with_factor(&chol, &ell, &mut rng)?;
        for (a, v) in acc.iter_mut().zip(&x) {
            *a += v;
        }
    }
    println!("\n{:>3} {:>10} {:>10}", "t", "Q⁻¹ℓ", "MC mean");
    for t in 0..6 {
        println!("{t:>3} {:>10.4} {:>10.4}", mean[t], acc[t] / n as f64);
    }
    Ok(())
}
