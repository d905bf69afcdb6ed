//! Verification-report data: named checks with residuals, thresholds, sample
//! counts, and pass flags. Pure data; serialization and timing live in the
//! CLI layer.

use alloc::string::String;
use alloc::vec::Vec;

/// One named check.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    /// The identity or construction the check exercises, as a plain formula
    /// string.
    pub anchor: String,
    /// Max residual (for `residual_below`) or min margin (for `margin_above`).
    pub metric: f64,
    pub threshold: f64,
    pub samples: u64,
    pub passed: bool,
    pub witness: Option<Vec<f64>>,
}

impl CheckResult {
    /// Pass iff `metric <= threshold`.
    pub fn residual_below(
        name: &str,
        anchor: &str,
        metric: f64,
        threshold: f64,
        samples: u64,
        witness: Option<Vec<f64>>,
    ) -> Self {
        let passed = metric.is_finite() && metric <= threshold;
        CheckResult {
            name: name.into(),
            anchor: anchor.into(),
            metric,
            threshold,
            samples,
            passed,
            witness: if passed { None } else { witness },
        }
    }

    /// Pass iff `metric > threshold`.
    pub fn margin_above(
        name: &str,
        anchor: &str,
        metric: f64,
        threshold: f64,
        samples: u64,
        witness: Option<Vec<f64>>,
    ) -> Self {
        let passed = metric.is_finite() && metric > threshold;
        CheckResult {
            name: name.into(),
            anchor: anchor.into(),
            metric,
            threshold,
            samples,
            passed,
            witness: if passed { None } else { witness },
        }
    }

    /// Pass/fail determined by the caller (structural checks).
    pub fn flag(name: &str, anchor: &str, passed: bool, witness: Option<Vec<f64>>) -> Self {
        CheckResult {
            name: name.into(),
            anchor: anchor.into(),
            metric: if passed { 0.0 } else { 1.0 },
            threshold: 0.5,
            samples: 1,
            passed,
            witness: if passed { None } else { witness },
        }
    }

    /// A check that could not run because construction failed.
    pub fn construction_failure(name: &str, anchor: &str) -> Self {
        CheckResult {
            name: name.into(),
            anchor: anchor.into(),
            metric: 1e300,
            threshold: 0.0,
            samples: 0,
            passed: false,
            witness: None,
        }
    }
}

/// The outcome of a scenario run: checks in a fixed deterministic order.
#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub scenario: String,
    pub checks: Vec<CheckResult>,
}

impl ScenarioOutcome {
    pub fn overall(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }
}
