//! Sample-complexity quantities evaluated exactly on enumerable domains.
//!
//! Values are propagated bottom-up with `V(s) = max_c V(c)`, gaps are read
//! off the enumerated graph, and the bounds are closed-form in those gaps.

mod lambert;

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::DomainSpec;
use crate::state::StateKey;

pub use lambert::{chatzigeorgiou_bounds, lambert_wm1};

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("Lambert W₋₁ is defined on [-1/e, 0), got {0}")]
    LambertDomain(f64),
    #[error("leaf mean {0} outside [0, 1]")]
    ValueOutOfRange(f64),
    #[error("domain has no terminal leaf")]
    NoLeaves,
    #[error("leaf {0} has a zero gap and ε = 0 with Δ* undefined")]
    ZeroDenominator(StateKey),
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Which states enter the maximum defining `Δ_ℓ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapConvention {
    /// Every non-root state on some root-to-ℓ path, ℓ included.
    #[default]
    Path,
    /// Strict ancestors of ℓ other than the root.
    AncestorsOnly,
}

/// Exact value of every state of a finite domain.
#[derive(Debug, Clone)]
pub struct ValueMap {
    domain: DomainSpec,
    values: HashMap<StateKey, f64>,
    /// States in discovery (level) order; the root comes first.
    order: Vec<StateKey>,
    leaves: Vec<StateKey>,
}

impl ValueMap {
    /// Enumerate `domain` and propagate `leaf_mean` up with the max rule.
    pub fn build(domain: &DomainSpec, mut leaf_mean: impl FnMut(&StateKey) -> f64) -> Result<Self, TheoryError> {
        let mut seen = HashSet::new();
        let mut order = Vec::new();
        let mut queue = VecDeque::from([domain.root()]);
        seen.insert(domain.root());
        while let Some(s) = queue.pop_front() {
            for (_, c) in domain.children(&s) {
                if seen.insert(c.clone()) {
                    queue.push_back(c);
                }
            }
            order.push(s);
        }
        let mut values = HashMap::with_capacity(order.len());
        let mut leaves = Vec::new();
        // children are discovered after their parents, so reverse order is bottom-up
        for s in order.iter().rev() {
            let v = if domain.is_terminal(s) {
                let v = leaf_mean(s);
                if !(0.0..=1.0).contains(&v) {
                    return Err(TheoryError::ValueOutOfRange(v));
                }
                leaves.push(s.clone());
                v
            } else {
                domain.children(s).iter().map(|(_, c)| values[c]).fold(f64::NEG_INFINITY, f64::max)
            };
            values.insert(s.clone(), v);
        }
        if leaves.is_empty() {
            return Err(TheoryError::NoLeaves);
        }
        leaves.reverse();
        Ok(Self { domain: domain.clone(), values, order, leaves })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn value(&self, s: &StateKey) -> f64 {
        self.values[s]
    }

    pub fn states(&self) -> &[StateKey] {
        &self.order
    }

    pub fn leaves(&self) -> &[StateKey] {
        &self.leaves
    }

    pub fn root_value(&self) -> f64 {
        self.value(&self.domain.root())
    }

    /// `ΔV(s) = max_{p ∈ P(s)} |V(s) - V(p)|`, 0 for the root.
    pub fn delta_v(&self, s: &StateKey) -> f64 {
        let v = self.value(s);
        self.domain.parents(s).iter().map(|p| (v - self.value(p)).abs()).fold(0.0, f64::max)
    }

    /// All strict ancestors of `s` in the domain.
    pub fn ancestors(&self, s: &StateKey) -> HashSet<StateKey> {
        let mut out = HashSet::new();
        let mut stack = self.domain.parents(s);
        while let Some(p) = stack.pop() {
            if out.insert(p.clone()) {
                stack.extend(self.domain.parents(&p));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gaps {
    /// `V(s*) - V(s*₂)`; `None` when every root child ties with the root.
    pub delta_star: Option<f64>,
    /// `Δ_ℓ` in the order of [`ValueMap::leaves`].
    pub per_leaf: Vec<f64>,
}

pub fn delta_star(values: &ValueMap) -> Option<f64> {
    let root = values.domain().root();
    let v0 = values.value(&root);
    values
        .domain()
        .children(&root)
        .iter()
        .map(|(_, c)| values.value(c))
        .filter(|&v| v != v0)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
        .map(|second| v0 - second)
}

pub fn leaf_gap(values: &ValueMap, leaf: &StateKey, convention: GapConvention) -> f64 {
    let root = values.domain().root();
    let mut states = values.ancestors(leaf);
    states.remove(&root);
    if convention == GapConvention::Path {
        states.insert(leaf.clone());
    }
    states.iter().map(|s| values.delta_v(s)).fold(0.0, f64::max)
}

pub fn gaps(values: &ValueMap, convention: GapConvention) -> Gaps {
    Gaps {
        delta_star: delta_star(values),
        per_leaf: values.leaves().iter().map(|l| leaf_gap(values, l, convention)).collect(),
    }
}

/// `Σ_ℓ 1 / max(Δ_ℓ², Δ*², ε²)`.
pub fn h_eps(values: &ValueMap, gaps: &Gaps, eps: f64) -> Result<f64, TheoryError> {
    let floor = gaps.delta_star.unwrap_or(0.0).max(eps);
    let mut h = 0.0;
    for (leaf, &d) in values.leaves().iter().zip(&gaps.per_leaf) {
        let m = d.max(floor);
        if m <= 0.0 {
            return Err(TheoryError::ZeroDenominator(leaf.clone()));
        }
        h += 1.0 / (m * m);
    }
    Ok(h)
}

/// `8 H ln(|L| / δ)`.
pub fn tau_ub(h: f64, leaf_count: usize, delta: f64) -> f64 {
    8.0 * h * (leaf_count as f64 / delta).ln()
}

/// `Σ_ℓ 16/Δ̄² ln ln(1/Δ̄²)` with `Δ̄ = max(Δ_ℓ, Δ*, ε)`; `None` when some
/// `1/Δ̄² ≤ e`, where the double logarithm is not positive.
pub fn second_term(gaps: &Gaps, eps: f64) -> Option<f64> {
    let floor = gaps.delta_star.unwrap_or(0.0).max(eps);
    let mut sum = 0.0;
    for &d in &gaps.per_leaf {
        let m = d.max(floor);
        let inv = 1.0 / (m * m);
        if !(inv > std::f64::consts::E) {
            return None;
        }
        sum += 16.0 * inv * inv.ln().ln();
    }
    Some(sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauMax {
    /// Evaluated with the exact `W₋₁`.
    pub exact: f64,
    /// Evaluated with `W₋₁` replaced by its closed-form upper bound.
    pub closed_form: f64,
    pub u: f64,
}

/// Growth-limited sample bound `[c e^{W₋₁(Δ²(b-1)/(8bc))}]^{1/(b-1)}`,
/// `c = δ^{(b-1)/b}`. `None` when the W argument leaves `[-1/e, 0)`.
pub fn tau_max(delta: f64, gap: f64, b: f64) -> Result<Option<TauMax>, TheoryError> {
    if !(b > 0.0 && b < 1.0) || !(delta > 0.0 && delta < 1.0) || !(gap > 0.0) {
        return Err(TheoryError::Argument(format!("tau_max(delta={delta}, gap={gap}, b={b})")));
    }
    let c = delta.powf((b - 1.0) / b);
    let arg = gap * gap * (b - 1.0) / (8.0 * b * c);
    if arg < -1.0 / std::f64::consts::E {
        return Ok(None);
    }
    let w = lambert_wm1(arg)?;
    let power = 1.0 / (b - 1.0);
    let exact = (c * w.exp()).powf(power);
    let u = (8.0 * b * c / (gap * gap * (1.0 - b))).ln() - 1.0;
    let w_closed = chatzigeorgiou_bounds(u.max(0.0)).1;
    let closed_form = (c * w_closed.exp()).powf(power);
    Ok(Some(TauMax { exact, closed_form, u }))
}

/// All the bound quantities for one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheorySummary {
    pub leaf_count: usize,
    pub delta_star: Option<f64>,
    pub h_eps: f64,
    pub tau_ub: f64,
    pub second_term: Option<f64>,
}

pub fn summarize(values: &ValueMap, eps: f64, delta: f64, convention: GapConvention) -> Result<TheorySummary, TheoryError> {
    let g = gaps(values, convention);
    let h = h_eps(values, &g, eps)?;
    let n = values.leaves().len();
    Ok(TheorySummary {
        leaf_count: n,
        delta_star: g.delta_star,
        h_eps: h,
        tau_ub: tau_ub(h, n, delta),
        second_term: second_term(&g, eps),
    })
}
