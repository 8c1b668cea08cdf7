//! Deterministic Riccati machinery.
//!
//! Drifts (nominal, map-regularized, triplet, mean repulsion), fixed-step RK4
//! flows with co-integrated transition matrices, Frechet derivatives, the
//! algebraic Riccati equation, Gramians with the steady-state sandwich, and
//! empirical contraction rates.

mod are;
mod drift;
mod flow;
mod gramian;
mod model;
mod rate;

pub use are::{are_solve, are_solve_triplet, lyapunov_solve};
pub use drift::{
    frechet_ricc, repulsion_factor, ricc, ricc_pi, ricc_repulsion, ricc_repulsion_expanded,
    DriftVariant,
};
pub use flow::{flow, flow_to, frechet_flow, FlowTrajectory, PsdViolation, BLOWUP_NORM};
pub use gramian::{
    check_rank_conditions, gramians, steady_bounds, steady_bounds_from, Bounds, GramianSet,
    RankReport,
};
pub use model::{FilterModel, Triplet};
pub use rate::{estimate_contraction_rate, fit_decay, fit_line, RateEstimate};

pub(crate) use flow::time_grid;

#[cfg(test)]
mod tests;
