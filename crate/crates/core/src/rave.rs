//! Rapid value estimates for choosing which feature to add.
//!
//! g-RAVE averages the reward of every evaluated set containing a feature;
//! ℓ-RAVE does the same but only for evaluations that extended a given
//! tracked node. The two are blended with weight `c_l / (c_l + t)`.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::RngCore;

use crate::bai::NewNodeScorer;
use crate::dag::SearchDag;
use crate::domain::Move;
use crate::state::{FeatureSet, StateKey};

/// Score given to a feature nothing is known about.
pub const NEUTRAL_PRIOR: f64 = 0.5;
pub const DEFAULT_C_L: f64 = 100.0;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Acc {
    sum: f64,
    count: u64,
}

impl Acc {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.count += 1;
    }

    fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

#[derive(Debug, Clone)]
pub struct RaveTable {
    c_l: f64,
    global: Vec<Acc>,
    local: HashMap<FeatureSet, Vec<Acc>>,
}

impl RaveTable {
    pub fn new(n_features: usize, c_l: f64) -> Self {
        Self { c_l, global: vec![Acc::default(); n_features], local: HashMap::new() }
    }

    pub fn c_l(&self) -> f64 {
        self.c_l
    }

    /// Account for one evaluation of `evaluated` with reward `value`.
    /// `tracked` are the nodes whose ℓ-RAVE statistics are maintained.
    pub fn record<'a>(&mut self, evaluated: &FeatureSet, value: f64, tracked: impl IntoIterator<Item = &'a FeatureSet>) {
        for f in evaluated.iter() {
            self.global[f].push(value);
        }
        let n = self.global.len();
        for node in tracked {
            if !node.is_subset_of(evaluated) || node.len() == evaluated.len() {
                continue;
            }
            let accs = self.local.entry(node.without_stop()).or_insert_with(|| vec![Acc::default(); n]);
            for f in evaluated.iter().filter(|&f| !node.contains(f)) {
                accs[f].push(value);
            }
        }
    }

    pub fn g_rave(&self, f: usize) -> Option<f64> {
        self.global[f].mean()
    }

    pub fn l_rave(&self, node: &FeatureSet, f: usize) -> Option<f64> {
        self.local.get(&node.without_stop()).and_then(|a| a[f].mean())
    }

    /// `t_{F,f}`.
    pub fn local_count(&self, node: &FeatureSet, f: usize) -> u64 {
        self.local.get(&node.without_stop()).map_or(0, |a| a[f].count)
    }

    /// Blended score of adding `mv` to `node`; the stop move always ranks first.
    pub fn score(&self, node: &FeatureSet, mv: Move) -> f64 {
        let f = match mv {
            Move::Stop => return f64::INFINITY,
            Move::Feature(f) => f,
        };
        let g = self.g_rave(f).unwrap_or(NEUTRAL_PRIOR);
        let t = self.local_count(node, f);
        if t == 0 {
            return g;
        }
        let beta = self.c_l / (self.c_l + t as f64);
        (1.0 - beta) * self.l_rave(node, f).unwrap() + beta * g
    }

    /// Candidate indices by decreasing score, ties in random order.
    pub fn rank(&self, node: &FeatureSet, moves: impl Iterator<Item = Move>, rng: &mut dyn RngCore) -> Vec<usize> {
        let scores: Vec<f64> = moves.map(|m| self.score(node, m)).collect();
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.shuffle(rng);
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        order
    }
}

/// Node-addition policy driven by a [`RaveTable`] fed from every evaluation.
#[derive(Debug, Clone)]
pub struct RaveScorer {
    pub table: RaveTable,
}

impl RaveScorer {
    pub fn new(n_features: usize, c_l: f64) -> Self {
        Self { table: RaveTable::new(n_features, c_l) }
    }
}

impl NewNodeScorer for RaveScorer {
    fn rank(&mut self, parent: &StateKey, candidates: &[(Move, StateKey)], rng: &mut dyn RngCore) -> Vec<usize> {
        let parent = parent.as_set().expect("RAVE ranks feature-set states");
        self.table.rank(parent, candidates.iter().map(|(m, _)| *m), rng)
    }

    fn observe(&mut self, dag: &SearchDag, evaluated: &FeatureSet, value: f64) {
        let tracked = dag
            .ids()
            .filter(|&id| !dag.is_terminal(id))
            .filter_map(|id| dag.key(id).as_set());
        self.table.record(evaluated, value, tracked);
    }
}
