//! The verification suites, one per checked property family.

mod flows;
mod stochastic;
mod structural;

use crate::error::{Error, Result};
use crate::regmaps::RegMap;
use crate::riccati::FilterModel;

use super::config::RunConfig;
use super::report::SuiteReport;

/// Inputs shared by every suite.
#[derive(Debug, Clone)]
pub struct SuiteContext {
    pub seed: u64,
    pub run: RunConfig,
    /// Model from the experiment config; suites that sweep generic models use
    /// it instead of their random draws.
    pub model: Option<FilterModel>,
    /// Extra map from the experiment config, added to the domination sweep.
    pub map: Option<RegMap>,
}

impl SuiteContext {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            run: RunConfig::with_seed(seed),
            model: None,
            map: None,
        }
    }
}

/// File written next to a suite's report.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct SuiteOutput {
    pub report: SuiteReport,
    pub artifacts: Vec<Artifact>,
}

impl From<SuiteReport> for SuiteOutput {
    fn from(report: SuiteReport) -> Self {
        Self {
            report,
            artifacts: Vec::new(),
        }
    }
}

pub struct SuiteSpec {
    pub name: &'static str,
    pub summary: &'static str,
    run: fn(&SuiteContext) -> Result<SuiteOutput>,
}

pub const SUITES: &[SuiteSpec] = &[
    SuiteSpec {
        name: "domination",
        summary: "perturbed flows dominate the nominal flow in Loewner order",
        run: flows::domination,
    },
    SuiteSpec {
        name: "commutation",
        summary: "projected flows commute with the projection on ring models",
        run: structural::commutation,
    },
    SuiteSpec {
        name: "decomposition",
        summary: "projected flow = projected start + transported orthogonal part",
        run: structural::decomposition,
    },
    SuiteSpec {
        name: "scheme-closed-form",
        summary: "idempotent-wise closed-form Riccati solution matches the integrator",
        run: structural::scheme_closed_form,
    },
    SuiteSpec {
        name: "are",
        summary: "Newton-Kleinman ARE solutions are stabilizing fixed points",
        run: flows::are,
    },
    SuiteSpec {
        name: "frechet",
        summary: "flow derivative equals E H E' against finite differences",
        run: flows::frechet,
    },
    SuiteSpec {
        name: "inflation-bias",
        summary: "inflation bias of the covariance flow is second order in epsilon",
        run: flows::inflation_bias,
    },
    SuiteSpec {
        name: "mean-repulsion",
        summary: "mean-repulsion drift equals the nominal drift with rescaled S",
        run: flows::mean_repulsion,
    },
    SuiteSpec {
        name: "projected-decay",
        summary: "projected flows converge exponentially to the flow from the projected start",
        run: structural::projected_decay,
    },
    SuiteSpec {
        name: "logdet",
        summary: "log-determinant bound for small perturbations of the identity",
        run: stochastic::logdet,
    },
    SuiteSpec {
        name: "gaussian-laws",
        summary: "W2 and relative entropy closed forms against scalar and Monte Carlo oracles",
        run: stochastic::gaussian_laws,
    },
    SuiteSpec {
        name: "entropy-wasserstein",
        summary: "entropy and W2 gaps between perturbed and nominal filters obey the Gramian bounds",
        run: stochastic::entropy_wasserstein,
    },
    SuiteSpec {
        name: "mean-field",
        summary: "EnKF sample covariance approaches the regularized flow at rate N^-1/2",
        run: stochastic::mean_field,
    },
    SuiteSpec {
        name: "nystrom-bias",
        summary: "expected Nystrom target of a sample covariance carries an s/N Schur bias",
        run: stochastic::nystrom_bias,
    },
    SuiteSpec {
        name: "sandwich",
        summary: "Gramian sandwich bounds contain the Riccati flow after the window v",
        run: flows::sandwich,
    },
    SuiteSpec {
        name: "scheme-axioms",
        summary: "scheme structural constants, idempotents and projection identities",
        run: structural::scheme_axioms,
    },
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.name).collect()
}

fn find(name: &str) -> Result<(usize, &'static SuiteSpec)> {
    SUITES
        .iter()
        .enumerate()
        .find(|(_, s)| s.name == name)
        .ok_or_else(|| Error::UnknownSuite(name.to_string()))
}

/// Run a suite with default settings.
pub fn verify(suite: &str, seed: u64) -> Result<SuiteReport> {
    Ok(verify_with(suite, &SuiteContext::new(seed))?.report)
}

/// Run a suite with explicit settings, returning its artifacts as well.
pub fn verify_with(suite: &str, ctx: &SuiteContext) -> Result<SuiteOutput> {
    let (_, spec) = find(suite)?;
    ctx.run.validate()?;
    (spec.run)(ctx)
}

/// Stable per-suite stream index.
fn suite_id(name: &str) -> u64 {
    find(name).map(|(i, _)| i as u64 + 1).unwrap_or(0)
}

fn step_for(ctx: &SuiteContext, model: &FilterModel, fraction: f64) -> f64 {
    ctx.run
        .step
        .unwrap_or(fraction * model.characteristic_time())
}
