//! Canonical state identities.
//!
//! A [`StateKey`] is what the search DAG uses to detect transpositions: two
//! move orders that reach the same [`FeatureSet`] produce equal keys, while
//! [`StateKey::Sequence`] keeps the move order and therefore never merges.

use std::fmt;

use serde::{Deserialize, Serialize};

const WORD_BITS: usize = 64;

/// A subset of features plus the virtual stopping feature.
///
/// The bitset has a fixed word count per domain so that equality and hashing
/// only depend on membership.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureSet {
    words: Vec<u64>,
    stop: bool,
}

impl FeatureSet {
    /// Empty set able to hold features `0..n_features`.
    pub fn empty(n_features: usize) -> Self {
        Self {
            words: vec![0; n_features.div_ceil(WORD_BITS).max(1)],
            stop: false,
        }
    }

    pub fn from_features(n_features: usize, features: impl IntoIterator<Item = usize>) -> Self {
        let mut set = Self::empty(n_features);
        for f in features {
            set.insert(f);
        }
        set
    }

    /// Number of features this set can address.
    pub fn capacity(&self) -> usize {
        self.words.len() * WORD_BITS
    }

    pub fn contains(&self, feature: usize) -> bool {
        let (w, b) = (feature / WORD_BITS, feature % WORD_BITS);
        self.words.get(w).is_some_and(|word| word >> b & 1 == 1)
    }

    pub fn insert(&mut self, feature: usize) {
        assert!(feature < self.capacity(), "feature {feature} out of range");
        self.words[feature / WORD_BITS] |= 1 << (feature % WORD_BITS);
    }

    pub fn remove(&mut self, feature: usize) {
        if feature < self.capacity() {
            self.words[feature / WORD_BITS] &= !(1 << (feature % WORD_BITS));
        }
    }

    pub fn with(&self, feature: usize) -> Self {
        let mut next = self.clone();
        next.insert(feature);
        next
    }

    pub fn without(&self, feature: usize) -> Self {
        let mut next = self.clone();
        next.remove(feature);
        next
    }

    pub fn has_stop(&self) -> bool {
        self.stop
    }

    pub fn with_stop(&self) -> Self {
        Self {
            words: self.words.clone(),
            stop: true,
        }
    }

    /// The same features with the stopping flag cleared.
    pub fn without_stop(&self) -> Self {
        Self {
            words: self.words.clone(),
            stop: false,
        }
    }

    /// Number of real (non-stop) features.
    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Real features in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * WORD_BITS + b)
            })
        })
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Subset test on real features; the stopping flag is ignored.
    pub fn is_subset_of(&self, other: &FeatureSet) -> bool {
        self.words
            .iter()
            .enumerate()
            .all(|(i, &w)| w & !other.words.get(i).copied().unwrap_or(0) == 0)
    }
}

impl fmt::Debug for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        let mut first = true;
        for feat in self.iter() {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{feat}")?;
            first = false;
        }
        if self.stop {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "STOP")?;
        }
        write!(f, "}}")
    }
}

/// Identity of a search state.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StateKey {
    /// Order-free feature subset (DAG mode).
    Set(FeatureSet),
    /// Ordered move sequence (tree mode).
    Sequence(Vec<u16>),
}

impl StateKey {
    pub fn as_set(&self) -> Option<&FeatureSet> {
        match self {
            StateKey::Set(s) => Some(s),
            StateKey::Sequence(_) => None,
        }
    }

    /// The features selected by this state regardless of move order.
    pub fn features(&self, n_features: usize) -> FeatureSet {
        match self {
            StateKey::Set(s) => s.clone(),
            StateKey::Sequence(moves) => {
                FeatureSet::from_features(n_features, moves.iter().map(|&m| m as usize))
            }
        }
    }
}

impl fmt::Debug for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateKey::Set(s) => write!(f, "{s}"),
            StateKey::Sequence(moves) => {
                write!(f, "<")?;
                for (i, m) in moves.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{m}")?;
                }
                write!(f, ">")
            }
        }
    }
}
