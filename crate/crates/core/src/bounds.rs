//! Exploration functions and per-leaf confidence intervals.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("risk level {0} must lie in (0, 1)")]
    Delta(f64),
    #[error("leaf_count / delta = {0} must exceed e for the iterated logarithm")]
    LogLogDomain(f64),
    #[error("sample count must be at least 1")]
    NoSamples,
}

/// Which exploration function scales the interval widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaKind {
    /// Union bound over the current leaf set; depends on `|L_t|`.
    Theory,
    /// `ln(ln(e N) / delta)`, independent of the leaf count.
    Practical,
}

impl std::str::FromStr for BetaKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "theory" | "beta1" => Ok(BetaKind::Theory),
            "practical" | "beta2" => Ok(BetaKind::Practical),
            other => Err(format!("unknown exploration function '{other}' (theory|beta1|practical|beta2)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationFn {
    pub kind: BetaKind,
    pub delta: f64,
}

impl ExplorationFn {
    pub fn new(kind: BetaKind, delta: f64) -> Result<Self, BoundsError> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(BoundsError::Delta(delta));
        }
        Ok(Self { kind, delta })
    }

    pub fn theory(delta: f64) -> Result<Self, BoundsError> {
        Self::new(BetaKind::Theory, delta)
    }

    pub fn practical(delta: f64) -> Result<Self, BoundsError> {
        Self::new(BetaKind::Practical, delta)
    }

    /// Whether the stored leaf bounds go stale when the leaf set grows.
    pub fn depends_on_leaf_count(&self) -> bool {
        self.kind == BetaKind::Theory
    }

    pub fn beta(&self, n: u64, leaf_count: usize) -> Result<f64, BoundsError> {
        match self.kind {
            BetaKind::Theory => beta_theory(n, leaf_count, self.delta),
            BetaKind::Practical => beta_practical(n, self.delta),
        }
    }

    /// Confidence interval of a leaf with `n >= 1` samples.
    pub fn interval(&self, mean: f64, n: u64, leaf_count: usize) -> Result<(f64, f64), BoundsError> {
        Ok(leaf_interval(mean, n, self.beta(n, leaf_count)?))
    }
}

/// `ln(|L|/δ) + 3 ln ln(|L|/δ) + 3/2 ln(ln N + 1)`.
pub fn beta_theory(n: u64, leaf_count: usize, delta: f64) -> Result<f64, BoundsError> {
    if n == 0 {
        return Err(BoundsError::NoSamples);
    }
    let ratio = leaf_count as f64 / delta;
    if ratio <= E {
        return Err(BoundsError::LogLogDomain(ratio));
    }
    let log_ratio = ratio.ln();
    Ok(log_ratio + 3.0 * log_ratio.ln() + 1.5 * ((n as f64).ln() + 1.0).ln())
}

/// `ln(ln(e N) / δ)`.
pub fn beta_practical(n: u64, delta: f64) -> Result<f64, BoundsError> {
    if n == 0 {
        return Err(BoundsError::NoSamples);
    }
    Ok(((n as f64).ln() + 1.0).ln() - delta.ln())
}

/// `(mean - h, mean + h)` with `h = sqrt(beta / 2n)`; deliberately not clamped to [0, 1].
pub fn leaf_interval(mean: f64, n: u64, beta: f64) -> (f64, f64) {
    debug_assert!(n >= 1 && beta >= 0.0);
    let half = (beta / (2.0 * n as f64)).sqrt();
    (mean - half, mean + half)
}
