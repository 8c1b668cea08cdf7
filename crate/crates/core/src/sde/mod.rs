//! Stochastic simulation of the linear-Gaussian filtering problem.
//!
//! Euler-Maruyama signal/observation paths, the (map-regularized)
//! Kalman-Bucy filter, the regularized ensemble Kalman-Bucy particle system,
//! and coupled Monte Carlo comparisons between filters run on shared
//! observation paths.

mod compare;
mod enkf;
mod filter;
mod paths;

pub use compare::{coupled_filter_comparison, halved_map, MomentReport, MonteCarloParams};
pub use enkf::{
    enkf, sample_covariance, sample_covariance_rescaled, EnkfOptions, EnkfRun, ParticleEnsemble,
    RankWarning,
};
pub use filter::{kalman_bucy_filter, FilterState};
pub use paths::{simulate_signal_obs, simulate_replicate, PathBundle};

#[cfg(test)]
mod tests;
