//! FUSE-style UCT over the feature lattice, used as a baseline.
//!
//! Nodes are shared between paths through a transposition table keyed by the
//! feature set. Each node widens its arm pool to `max(1, ⌊(T+1)^b⌋)` arms in
//! RAVE order, picks among them with UCB1, and a new node ends the descent
//! with one rollout evaluation. The reward is added to every node on the path.

use std::collections::HashMap;
use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::bai::RunError;
use crate::domain::{DomainSpec, Move};
use crate::oracle::{Oracle, OracleError};
use crate::rave::{RaveTable, DEFAULT_C_L};
use crate::state::{FeatureSet, StateKey};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuseParams {
    pub budget: u64,
    /// Progressive-widening exponent.
    pub b: f64,
    /// UCB1 exploration constant.
    pub c: f64,
    pub c_l: f64,
}

impl Default for FuseParams {
    fn default() -> Self {
        Self { budget: 10_000, b: 0.5, c: std::f64::consts::SQRT_2, c_l: DEFAULT_C_L }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuseReport {
    pub leaf_key: StateKey,
    pub features: Vec<usize>,
    pub n_features: usize,
    /// Average reward of the recommended node.
    pub value_estimate: f64,
    pub samples: u64,
    pub nodes: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Default)]
struct Entry {
    visits: u64,
    sum: f64,
    pool: Vec<Move>,
}

impl Entry {
    fn mean(&self) -> f64 {
        if self.visits == 0 { 0.0 } else { self.sum / self.visits as f64 }
    }
}

fn apply(state: &FeatureSet, mv: Move) -> FeatureSet {
    match mv {
        Move::Feature(f) => state.with(f),
        Move::Stop => state.with_stop(),
    }
}

/// Grow the arm pool of `key` to the width allowed by its visit count.
fn widen(entry: &mut Entry, key: &FeatureSet, domain: &DomainSpec, b: f64, rave: &RaveTable, rng: &mut dyn RngCore) {
    let available = domain.child_count(&StateKey::Set(key.clone()));
    let target = (((entry.visits + 1) as f64).powf(b).floor() as usize).clamp(1, available.max(1));
    if entry.pool.len() >= target || entry.pool.len() >= available {
        return;
    }
    let moves: Vec<Move> = domain
        .children(&StateKey::Set(key.clone()))
        .into_iter()
        .map(|(m, _)| m)
        .filter(|m| !entry.pool.contains(m))
        .collect();
    let order = rave.rank(key, moves.iter().copied(), rng);
    let missing = target - entry.pool.len();
    entry.pool.extend(order.into_iter().take(missing).map(|i| moves[i]));
}

fn ucb1(child: Option<&Entry>, parent_visits: u64, c: f64) -> f64 {
    match child {
        Some(e) if e.visits > 0 => e.mean() + c * ((parent_visits.max(1) as f64).ln() / e.visits as f64).sqrt(),
        _ => f64::INFINITY,
    }
}

/// Run `params.budget` iterations from the empty set of a feature lattice.
pub fn run_fuse(
    domain: &DomainSpec,
    oracle: &mut dyn Oracle,
    params: &FuseParams,
    rng: &mut dyn RngCore,
) -> Result<FuseReport, RunError> {
    let DomainSpec::FeatureLattice { n_features } = *domain else {
        return Err(RunError::Params("FUSE runs on the feature lattice".into()));
    };
    if !(params.b > 0.0 && params.b <= 1.0) || !(params.c >= 0.0) || !(params.c_l > 0.0) {
        return Err(RunError::Params(format!("invalid FUSE parameters {params:?}")));
    }
    let start = Instant::now();
    let root = FeatureSet::empty(n_features);
    let mut table: HashMap<FeatureSet, Entry> = HashMap::new();
    table.insert(root.clone(), Entry::default());
    let mut rave = RaveTable::new(n_features, params.c_l);

    for _ in 0..params.budget {
        let mut path = vec![root.clone()];
        let mut s = root.clone();
        let terminal = loop {
            if s.has_stop() {
                break true;
            }
            let entry = table.entry(s.clone()).or_default();
            if entry.visits == 0 && s != root {
                break false;
            }
            widen(entry, &s, domain, params.b, &rave, rng);
            let parent_visits = entry.visits;
            let pool = entry.pool.clone();
            let mut best: Option<(Move, f64)> = None;
            for mv in pool {
                let u = ucb1(table.get(&apply(&s, mv)), parent_visits, params.c);
                if best.is_none_or(|(_, bu)| u > bu) {
                    best = Some((mv, u));
                }
            }
            let (mv, _) = best.expect("pool is never empty below a non-terminal node");
            s = apply(&s, mv);
            path.push(s.clone());
        };

        let eval = oracle.evaluate(&StateKey::Set(s.clone()), terminal, rng)?;
        if !(0.0..=1.0).contains(&eval.value) {
            return Err(OracleError::OutOfRange(eval.value).into());
        }
        for key in &path {
            let e = table.entry(key.clone()).or_default();
            e.visits += 1;
            e.sum += eval.value;
        }
        rave.record(&eval.evaluated, eval.value, path.iter().filter(|k| !k.has_stop()));
    }

    // follow the visited child with the best average reward
    let mut s = root;
    while !s.has_stop() {
        let entry = &table[&s];
        let next = entry
            .pool
            .iter()
            .map(|&mv| apply(&s, mv))
            .filter_map(|k| table.get(&k).filter(|e| e.visits > 0).map(|e| (k, e.mean())))
            .fold(None::<(FeatureSet, f64)>, |acc, (k, m)| match acc {
                Some((_, am)) if am >= m => acc,
                _ => Some((k, m)),
            });
        match next {
            Some((k, _)) => s = k,
            None => break,
        }
    }
    let value_estimate = table.get(&s).map_or(0.0, Entry::mean);
    let features = s.without_stop().to_vec();
    Ok(FuseReport {
        n_features: features.len(),
        features,
        leaf_key: StateKey::Set(s),
        value_estimate,
        samples: params.budget,
        nodes: table.len(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
