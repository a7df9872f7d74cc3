//! Simulation laboratory for two-sided-product bandits.
//!
//! Arms are (row, column) cells of a reward matrix with low-rank structure.
//! The crate provides:
//!
//! - ground-truth reward matrices and their structural statistics
//!   ([`matrix`]): near-optimal sets, the near-optimal function `g`, the
//!   subsampling cost `psi`, row incoherence, and seeded low-rank generators;
//! - low-rank estimation from sparse entry observations ([`estimator`]):
//!   nuclear-norm penalized least squares solved by accelerated proximal
//!   gradient with singular-value soft-thresholding, plus a row-enhancement
//!   pass that re-fits each row inside the estimated right-singular subspace;
//! - sequential decision rules ([`policies`]): the low-rank bandit with
//!   forced sampling and a targeted UCB subroutine, its submatrix-sampled
//!   variant, and UCB / subsampled-UCB / OFUL baselines;
//! - simulation environments and regret accounting ([`mod@env`]);
//! - parameter-selection machinery ([`tuning`]): phi1/phi2 bound curves,
//!   filtering-resolution selection, submatrix-size selection, the horizon
//!   threshold for switching away from subsampling, and empirical fits of
//!   `g` and `psi`;
//! - a reproducible experiment harness ([`experiment`]) with seeded,
//!   replicate-parallel runs, sweeps, CSV emission, and regret-part
//!   decomposition.
//!
//! Replicates are data-parallel; the `parallel` feature (on by default)
//! runs them on a rayon pool, and without it the same code runs
//! sequentially. Outputs are byte-identical at any parallelism degree.

pub mod env;
pub mod estimator;
pub mod experiment;
pub mod matrix;
pub mod oracles;
pub mod policies;
pub mod rng;
mod svd;
pub mod tuning;

pub use env::{Environment, RegretTrace};
pub use estimator::{LowRankEstimate, ObservationSet, SolverConfig};
pub use experiment::{ExperimentConfig, RunOutput, RunSummary};
pub use matrix::{Arm, RewardMatrix, SubmatrixIndex, SvdFactors};
pub use policies::{Policy, PolicySpec};
