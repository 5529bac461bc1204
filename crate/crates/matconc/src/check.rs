//! Check outcomes: signed margins judged against explicit tolerances.
//!
//! Every verification in this crate reduces to "is some signed slack ≥ 0 up to
//! tolerance?" — λ_min of a slack matrix for PSD-order checks, a trace difference
//! for trace inequalities, a worst residual for structural validations. The
//! [`CheckResult`] records the margin, the scale used for the relative part of the
//! tolerance, and an optional witness payload, so reports are auditable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute + relative tolerance pair. A margin `m` at scale `s` passes when
/// `m ≥ −(abs + rel·s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-9,
            rel: 1e-9,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Result<Self> {
        if !(abs.is_finite() && rel.is_finite() && abs >= 0.0 && rel >= 0.0) {
            return Err(Error::validation(format!(
                "tolerance components must be finite and nonnegative, got abs={abs}, rel={rel}"
            )));
        }
        Ok(Tolerance { abs, rel })
    }

    /// Absolute-only tolerance.
    pub fn absolute(abs: f64) -> Self {
        Tolerance { abs, rel: 0.0 }
    }

    /// The pass threshold at a given scale: `abs + rel·scale`.
    pub fn threshold(&self, scale: f64) -> f64 {
        self.abs + self.rel * scale
    }
}

/// Outcome of one named check: `pass ⇔ margin ≥ −(tol.abs + tol.rel·scale)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    /// Signed slack; negative means the inequality (or identity) is violated by
    /// that amount before tolerance is applied.
    pub margin: f64,
    /// Scale the relative tolerance was applied to.
    pub scale: f64,
    pub tolerance: Tolerance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<serde_json::Value>,
}

impl CheckResult {
    pub fn from_margin(name: impl Into<String>, margin: f64, scale: f64, tol: Tolerance) -> Self {
        CheckResult {
            name: name.into(),
            pass: margin >= -tol.threshold(scale),
            margin,
            scale,
            tolerance: tol,
            witness: None,
        }
    }

    pub fn with_witness(mut self, witness: serde_json::Value) -> Self {
        self.witness = Some(witness);
        self
    }

    /// Worst (smallest-margin) result of a collection; `None` when empty.
    pub fn worst(results: &[CheckResult]) -> Option<&CheckResult> {
        results
            .iter()
            .min_by(|a, b| a.margin.partial_cmp(&b.margin).expect("finite margins"))
    }
}

/// Witness helper: a complex vector as `{"re": [...], "im": [...]}`.
pub fn vector_witness(re: &[f64], im: &[f64]) -> serde_json::Value {
    serde_json::json!({ "re": re, "im": im })
}
