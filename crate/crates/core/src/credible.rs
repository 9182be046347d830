//! Posterior credibility of an EM-run interval and the number of runs needed
//! to reach a target credibility.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width used in place of zero for identifiable queries.
pub const MACHINE_ZERO_WIDTH: f64 = 1e-12;

/// Relative error used with [`MACHINE_ZERO_WIDTH`] for the identifiable limit.
pub const IDENTIFIABLE_EPSILON_REL: f64 = 1.5;

/// Upper limit of the linear scan in [`required_runs`].
pub const REQUIRED_RUNS_SCAN_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CredibleInterval {
    /// Value clamped to `[0, 1]`.
    pub probability: f64,
    /// Closed-form value before clamping.
    pub raw: f64,
    pub clamped: bool,
}

/// Closed form in the relative error `eps = delta / (2 L)`, with no domain
/// checks.
pub fn closed_form(n: usize, l: f64, eps: f64) -> f64 {
    let e = 2.0 - n as f64;
    let num = 1.0 + (1.0 + 2.0 * eps).powf(e) - 2.0 * (1.0 + eps).powf(e);
    let ln2 = l.powi(n as i32 - 2);
    let den = (1.0 - ln2) - (n as f64 - 2.0) * (1.0 - l) * ln2;
    num / den
}

/// Probability that each exact bound lies within `delta` of the observed
/// interval of width `l` spanned by `n` runs.
pub fn credible_interval(n: usize, l: f64, delta: f64) -> Result<CredibleInterval> {
    if n < 3 {
        return Err(Error::Domain(format!("credible interval needs n >= 3, got {n}")));
    }
    if !(l > 0.0 && l <= 1.0) {
        return Err(Error::Domain(format!("interval width {l} outside (0, 1]")));
    }
    if !(delta > 0.0 && delta < l) {
        return Err(Error::Domain(format!("delta {delta} outside (0, {l})")));
    }
    let raw = closed_form(n, l, delta / (2.0 * l));
    let probability = raw.clamp(0.0, 1.0);
    Ok(CredibleInterval {
        probability,
        raw,
        clamped: probability != raw,
    })
}

/// Smallest `n >= 3` whose credibility at relative error `epsilon_rel` and
/// width `l` reaches `target`.
pub fn required_runs(target: f64, epsilon_rel: f64, l: f64) -> Result<usize> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Domain(format!("target {target} outside (0, 1)")));
    }
    if !(epsilon_rel > 0.0) {
        return Err(Error::Domain("relative error must be positive".into()));
    }
    if !(l > 0.0 && l <= 1.0) {
        return Err(Error::Domain(format!("interval width {l} outside (0, 1]")));
    }
    (3..=REQUIRED_RUNS_SCAN_CAP)
        .find(|n| closed_form(*n, l, epsilon_rel) >= target)
        .ok_or_else(|| {
            Error::Domain(format!(
                "target {target} not reached within {REQUIRED_RUNS_SCAN_CAP} runs"
            ))
        })
}
