//! Search spaces over feature subsets.
//!
//! Every variant computes children, parents and terminality on demand; nothing
//! is materialized ahead of the search.

use serde::{Deserialize, Serialize};

use crate::state::{FeatureSet, StateKey};

/// The move that turns a parent state into one of its children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Move {
    Feature(usize),
    Stop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DomainSpec {
    /// Powerset lattice with a stopping feature; terminal iff the stop flag is set.
    FeatureLattice { n_features: usize },
    /// Subset lattice whose terminal leaves are exactly the sets of size `leaf_depth`.
    FixedLattice { n_features: usize, leaf_depth: usize },
    /// Redundant tree over ordered move sequences of length `leaf_depth`.
    FixedTree { n_features: usize, leaf_depth: usize },
}

impl DomainSpec {
    pub fn n_features(&self) -> usize {
        match *self {
            DomainSpec::FeatureLattice { n_features }
            | DomainSpec::FixedLattice { n_features, .. }
            | DomainSpec::FixedTree { n_features, .. } => n_features,
        }
    }

    pub fn is_tree(&self) -> bool {
        matches!(self, DomainSpec::FixedTree { .. })
    }

    pub fn root(&self) -> StateKey {
        match self {
            DomainSpec::FixedTree { .. } => StateKey::Sequence(Vec::new()),
            _ => StateKey::Set(FeatureSet::empty(self.n_features())),
        }
    }

    /// Depth of a state: number of moves from the root. All root paths in
    /// these spaces have the same length.
    pub fn depth(&self, state: &StateKey) -> usize {
        match state {
            StateKey::Set(s) => s.len() + usize::from(s.has_stop()),
            StateKey::Sequence(moves) => moves.len(),
        }
    }

    pub fn is_terminal(&self, state: &StateKey) -> bool {
        match (self, state) {
            (DomainSpec::FeatureLattice { .. }, StateKey::Set(s)) => s.has_stop(),
            (DomainSpec::FixedLattice { leaf_depth, .. }, StateKey::Set(s)) => {
                s.len() >= *leaf_depth
            }
            (DomainSpec::FixedTree { leaf_depth, .. }, StateKey::Sequence(m)) => {
                m.len() >= *leaf_depth
            }
            _ => panic!("state {state} does not belong to domain {self:?}"),
        }
    }

    /// All children of `state` in move order: features ascending, stop last.
    pub fn children(&self, state: &StateKey) -> Vec<(Move, StateKey)> {
        if self.is_terminal(state) {
            return Vec::new();
        }
        let n = self.n_features();
        match state {
            StateKey::Set(s) => {
                let mut out: Vec<(Move, StateKey)> = (0..n)
                    .filter(|&f| !s.contains(f))
                    .map(|f| (Move::Feature(f), StateKey::Set(s.with(f))))
                    .collect();
                if matches!(self, DomainSpec::FeatureLattice { .. }) {
                    out.push((Move::Stop, StateKey::Set(s.with_stop())));
                }
                out
            }
            StateKey::Sequence(moves) => (0..n)
                .filter(|&f| !moves.contains(&(f as u16)))
                .map(|f| {
                    let mut next = moves.clone();
                    next.push(f as u16);
                    (Move::Feature(f), StateKey::Sequence(next))
                })
                .collect(),
        }
    }

    /// `children(state).len()` without building the children.
    pub fn child_count(&self, state: &StateKey) -> usize {
        if self.is_terminal(state) {
            return 0;
        }
        let n = self.n_features();
        match state {
            StateKey::Set(s) => n - s.len() + usize::from(matches!(self, DomainSpec::FeatureLattice { .. })),
            StateKey::Sequence(moves) => n - moves.len(),
        }
    }

    /// All parents of `state` in the full space.
    pub fn parents(&self, state: &StateKey) -> Vec<StateKey> {
        match state {
            StateKey::Set(s) if s.has_stop() => vec![StateKey::Set(s.without_stop())],
            StateKey::Set(s) => s.iter().map(|f| StateKey::Set(s.without(f))).collect(),
            StateKey::Sequence(moves) if moves.is_empty() => Vec::new(),
            StateKey::Sequence(moves) => vec![StateKey::Sequence(moves[..moves.len() - 1].to_vec())],
        }
    }

    /// The move leading from `parent` to `child`, if they are adjacent.
    pub fn move_between(&self, parent: &StateKey, child: &StateKey) -> Option<Move> {
        match (parent, child) {
            (StateKey::Set(p), StateKey::Set(c)) => {
                if !p.has_stop() && c.has_stop() && p == &c.without_stop() {
                    return Some(Move::Stop);
                }
                if p.has_stop() || c.has_stop() || c.len() != p.len() + 1 || !p.is_subset_of(c) {
                    return None;
                }
                c.iter().find(|&f| !p.contains(f)).map(Move::Feature)
            }
            (StateKey::Sequence(p), StateKey::Sequence(c)) => {
                (c.len() == p.len() + 1 && c.starts_with(p)).then(|| Move::Feature(c[p.len()] as usize))
            }
            _ => None,
        }
    }

    /// Features selected by `state`, independent of how it was reached.
    pub fn features(&self, state: &StateKey) -> FeatureSet {
        state.features(self.n_features())
    }
}
