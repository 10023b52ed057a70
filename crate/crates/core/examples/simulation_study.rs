//! A small slice of the simulation study: every model on a few replicates,
//! raw rows and the per-cell aggregate written to stdout as CSV.
//!
//!     cargo run --release --example simulation_study

use nbbtf::sim::{aggregate, run_experiment, write_csv, Budget, ExperimentSpec};

fn main() -> nbbtf::Result<()> {
    let spec = ExperimentSpec {
        lengths: vec![200],
        overdispersion: vec![1, 10],
        reps: 2,
        budget: Budget {
            iterations: 6_000,
            burnin: 5_000,
            thin: 5,
        },
        workers: 2,
        ..ExperimentSpec::default()
    };
    let rows = run_experiment(&spec)?;
    write_csv(&rows, std::io::stdout())?;
    println!();
    write_csv(&aggregate(&rows), std::io::stdout())?;
    Ok(())
}
