//! Negative binomial Bayesian trend filtering with a dynamic horseshoe
//! prior on the trend increments.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernels`]: Pólya-Gamma, slice and discrete samplers.
//! * [`banded`]: banded Cholesky, canonical-form Gaussian draws and the
//!   difference operator.
//! * [`dhs`]: the dynamic horseshoe log-volatility process.
//! * [`model`]: the count model and its Gibbs sampler.
//! * [`summary`]: pointwise posterior summaries.
//! * [`baselines`]: exponential smoothing and a Gaussian-likelihood trend
//!   filter.
//! * [`sim`]: synthetic data and the simulation-study harness.
//! * [`cli`]: file formats and the `nbbtf` command line.
//!
//! Runnable walkthroughs live in `examples/`.

pub mod banded;
pub mod baselines;
pub mod cli;
pub mod dhs;
pub mod error;
pub mod kernels;
pub mod model;
pub mod rng;
pub mod sim;
pub mod summary;

pub use error::{Error, Result};
pub use model::{run_mcmc, CountSeries, ModelConfig, PosteriorDraws};
pub use rng::RngStream;
pub use summary::{posterior_summary, PosteriorSummary};
