//! Numerical laboratory for perturbed and projected Kalman-Bucy semigroups.
//!
//! The crate integrates nominal, perturbed and projected matrix Riccati flows,
//! simulates Kalman-Bucy filters and regularized ensemble Kalman-Bucy particle
//! systems, and ships verification suites that check the stability, domination
//! and bias properties of these flows numerically.
//!
//! Module map:
//! - [`matlib`]: symmetric/PSD matrix tools and the matrix text format
//! - [`riccati`]: drifts, flows, transitions, ARE, Gramians, rate fits
//! - [`regmaps`]: covariance regularization maps and their induced objects
//! - [`schemes`]: association schemes, Bose-Mesner projections, closed forms
//! - [`sde`]: signal/observation paths, filters, EnKF particle systems
//! - [`gaussmetrics`]: Wasserstein-2, relative entropy, log-det bound
//! - [`lab`]: configs, verification suites, reports, plot tables

pub mod error;
pub mod gaussmetrics;
pub mod lab;
pub mod matlib;
pub mod regmaps;
pub mod riccati;
pub mod rng;
pub mod schemes;
pub mod sde;

pub use error::{Error, Result};
pub use matlib::{Mat, SpdMatrix, Vector};
pub use regmaps::{RegMap, TargetSpec};
pub use riccati::{DriftVariant, FilterModel, FlowTrajectory};
pub use schemes::AssociationScheme;
