use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

/// One measured quantity compared against its threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    /// The mathematical property the check exercises.
    pub property: String,
    pub status: CheckStatus,
    pub measured: Option<f64>,
    /// `<=`, `>=` or `in`.
    pub comparison: String,
    pub threshold: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

fn status(ok: bool) -> CheckStatus {
    if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}

impl Check {
    /// Passes iff `measured <= threshold` (NaN fails).
    pub fn at_most(id: impl Into<String>, property: &str, measured: f64, threshold: f64) -> Self {
        Self {
            id: id.into(),
            property: property.into(),
            status: status(measured <= threshold),
            measured: Some(measured),
            comparison: "<=".into(),
            threshold: vec![threshold],
            note: None,
        }
    }

    /// Passes iff `measured >= threshold` (NaN fails).
    pub fn at_least(id: impl Into<String>, property: &str, measured: f64, threshold: f64) -> Self {
        Self {
            id: id.into(),
            property: property.into(),
            status: status(measured >= threshold),
            measured: Some(measured),
            comparison: ">=".into(),
            threshold: vec![threshold],
            note: None,
        }
    }

    /// Passes iff `lo <= measured <= hi`.
    pub fn within(id: impl Into<String>, property: &str, measured: f64, lo: f64, hi: f64) -> Self {
        Self {
            id: id.into(),
            property: property.into(),
            status: status(measured >= lo && measured <= hi),
            measured: Some(measured),
            comparison: "in".into(),
            threshold: vec![lo, hi],
            note: None,
        }
    }

    /// Boolean outcome recorded as 1 (true) against threshold 1.
    pub fn holds(id: impl Into<String>, property: &str, ok: bool) -> Self {
        Self::at_least(id, property, if ok { 1.0 } else { 0.0 }, 1.0)
    }

    pub fn skip(id: impl Into<String>, property: &str, reason: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            property: property.into(),
            status: CheckStatus::Skip,
            measured: None,
            comparison: "-".into(),
            threshold: Vec::new(),
            note: Some(reason.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }
}

/// Version and seed of the run that produced a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamp {
    pub version: String,
    pub seed: u64,
}

impl Stamp {
    pub fn new(seed: u64) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub status: CheckStatus,
    pub checks: Vec<Check>,
    pub stamp: Stamp,
}

impl SuiteReport {
    /// Passes when no check failed, at least one passed, every check names
    /// its property, and every skip records a reason.
    pub fn new(suite: &str, seed: u64, checks: Vec<Check>) -> Self {
        let wellformed = checks.iter().all(|c| {
            !c.property.trim().is_empty()
                && (c.status != CheckStatus::Skip || c.note.as_ref().is_some_and(|n| !n.is_empty()))
        });
        let any_fail = checks.iter().any(|c| c.status == CheckStatus::Fail);
        let any_pass = checks.iter().any(Check::passed);
        Self {
            suite: suite.into(),
            status: status(wellformed && !any_fail && any_pass),
            checks,
            stamp: Stamp::new(seed),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
