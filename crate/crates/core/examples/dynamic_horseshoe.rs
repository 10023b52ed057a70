//! The shrinkage block on its own: increments that are mostly zero with a
//! few jumps. The log-volatilities pick out the jumps and κ drops there.
//!
//!     cargo run --release --example dynamic_horseshoe

use nbbtf::dhs::{shrinkage_profile, update_dhs, DhsPriorConfig, DhsState, OmoriMixture};
use nbbtf::RngStream;

fn main() -> nbbtf::Result<()> {
    let mut rng = RngStream::new(3, 0);
    let n = 120;
    let omega: Vec<f64> = (0..n)
        .map(|t| {
            let noise = 0.01 * rng.std_normal();
            if t == 30 || t == 75 { 3.0 + noise } else { noise }
        })
        .collect();

    let mix = OmoriMixture::standard();
    let prior = DhsPriorConfig::new(1.0)?;
    let mut state = DhsState::initialize(&omega, 0.0, &mix, &mut rng)?;

    let (burn, keep) = (2000, 2000);
    let mut kappa = vec![0.0; n];
    let (mut phi, mut mu) = (0.0, 0.0);
    for it in 0..burn + keep {
        update_dhs(&omega, &mut state, &prior, &mix, &mut rng)
            .map_err(|(step, e)| nbbtf::Error::InvalidArgument(format!("{step}: {e}")))?;
        if it >= burn {
            for (k, v) in kappa.iter_mut().zip(shrinkage_profile(&state.h)) {
                *k += v / keep as f64;
            }
            phi += state.phi / keep as f64;
            mu += state.mu / keep as f64;
        }
    }
    println!("posterior mean φ = {phi:.3}, μ = {mu:.2}");
    println!("mean κ at the jumps: {:.3} {:.3}", kappa[30], kappa[75]);
    let quiet: f64 = kappa.iter().enumerate().filter(|(t, _)| *t != 30 && *t != 75).map(|(_, k)| k).sum();
    println!("mean κ elsewhere:    {:.3}", quiet / (n - 2) as f64);
    Ok(())
}
