//! Best terminal-leaf identification by solving one best-arm problem per
//! stage, from the root down.
//!
//! The frontier `s_n` is the first node on the chain of solved
//! recommendations whose own problem is still open. Only the subDAG under it
//! grows, on a clock that restarts for each new frontier.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::bai::{bai_select, expand_due, has_unrealized_child, Engine, NewNodeScorer, RunError, StepView};
use crate::bounds::ExplorationFn;
use crate::dag::{DagError, NodeId, SearchDag};
use crate::domain::{DomainSpec, Move};
use crate::oracle::Oracle;
use crate::state::StateKey;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BliParams {
    pub epsilon: f64,
    pub beta: ExplorationFn,
    pub b: f64,
    pub max_steps: u64,
    /// Features pre-inserted two levels deep under every new frontier; 0 disables.
    pub init_width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BliReport {
    pub leaf: NodeId,
    pub leaf_key: StateKey,
    /// Sample mean of the returned leaf (its exact value for a deterministic oracle).
    pub value_estimate: f64,
    pub samples: u64,
    pub node_updates: u64,
    pub naive_node_updates: u64,
    pub expansions: u64,
    pub initialized_nodes: u64,
    /// Number of distinct frontiers visited.
    pub stages: usize,
    /// Real features selected by the returned leaf.
    pub n_features: usize,
    pub dag_size: usize,
    pub stopped: bool,
    pub wall_time_s: f64,
}

/// True iff `node` is a terminal leaf of the full domain.
pub fn bli_stop(dag: &SearchDag, node: NodeId) -> bool {
    dag.is_terminal(node)
}

/// Root-to-frontier chain: follow recommendations while the stage is solved.
pub fn bli_select_path(dag: &SearchDag, from: NodeId, epsilon: f64) -> Vec<NodeId> {
    let mut path = vec![from];
    let mut s = from;
    while !bli_stop(dag, s) && !dag.children(s).is_empty() {
        let sel = bai_select(dag, s).expect("node has children");
        if !sel.stops(epsilon) {
            break;
        }
        s = sel.best;
        path.push(s);
    }
    path
}

pub fn bli_select(dag: &SearchDag, from: NodeId, epsilon: f64) -> NodeId {
    *bli_select_path(dag, from, epsilon).last().unwrap()
}

/// Insert the stop child and the `width` best-ranked feature children of
/// `node`, then the children of those that only use the chosen moves.
/// Returns the number of new nodes.
pub fn initialize_frontier(
    dag: &mut SearchDag,
    domain: &DomainSpec,
    node: NodeId,
    width: usize,
    scorer: &mut dyn NewNodeScorer,
    rng: &mut dyn RngCore,
) -> Result<usize, DagError> {
    let key = dag.key(node).clone();
    let candidates = domain.children(&key);
    if candidates.is_empty() {
        return Ok(0);
    }
    let order = scorer.rank(&key, &candidates, rng);
    let chosen: Vec<Move> = order
        .iter()
        .map(|&i| candidates[i].0)
        .filter(|m| matches!(m, Move::Feature(_)))
        .take(width)
        .collect();
    let allowed = |m: &Move| *m == Move::Stop || chosen.contains(m);

    let mut added = 0;
    let mut level1 = Vec::new();
    for (mv, child) in candidates.into_iter().filter(|(m, _)| allowed(m)) {
        if !dag.contains(&child) {
            dag.insert_node(domain, child.clone())?;
            added += 1;
        }
        if mv != Move::Stop {
            level1.push(child);
        }
    }
    for parent in &level1 {
        for (_, child) in domain.children(parent).into_iter().filter(|(m, _)| allowed(m)) {
            if !dag.contains(&child) {
                dag.insert_node(domain, child)?;
                added += 1;
            }
        }
    }
    Ok(added)
}

fn needs_sibling(dag: &SearchDag, domain: &DomainSpec, s: NodeId) -> bool {
    dag.children(s).len() < 2 && has_unrealized_child(dag, domain, s)
}

/// Insert the best-ranked unrealized child of `node` itself.
pub fn add_child(
    dag: &mut SearchDag,
    domain: &DomainSpec,
    node: NodeId,
    scorer: &mut dyn NewNodeScorer,
    rng: &mut dyn RngCore,
) -> Result<Option<NodeId>, DagError> {
    let key = dag.key(node).clone();
    let candidates: Vec<(Move, StateKey)> =
        domain.children(&key).into_iter().filter(|(_, k)| !dag.contains(k)).collect();
    if candidates.is_empty() {
        return Ok(None);
    }
    let pick = scorer.choose(&key, &candidates, rng);
    let child = candidates.into_iter().nth(pick).expect("scorer index in range").1;
    dag.insert_node(domain, child).map(Some)
}

/// BLI-MCDS from `dag` (holding at least the root).
#[allow(clippy::too_many_arguments)]
pub fn run_bli(
    dag: &mut SearchDag,
    domain: &DomainSpec,
    oracle: &mut dyn Oracle,
    scorer: &mut dyn NewNodeScorer,
    params: &BliParams,
    rng: &mut dyn RngCore,
    observer: &mut dyn FnMut(&StepView),
) -> Result<BliReport, RunError> {
    crate::bai::BaiParams { epsilon: params.epsilon, beta: params.beta, b: params.b, max_steps: params.max_steps }
        .validate()?;
    let start = Instant::now();
    let root = dag.root();
    let mut eng = Engine {
        domain,
        oracle,
        scorer,
        rng,
        beta: params.beta,
        samples: 0,
        node_updates: 0,
        naive_node_updates: 0,
        refresh_updates: 0,
        expansions: 0,
    };
    eng.refresh_updates += dag.refresh_bounds(&params.beta)? as u64;

    let mut initialized: HashSet<NodeId> = HashSet::new();
    let mut clocks: HashMap<NodeId, u64> = HashMap::new();
    let mut initialized_nodes = 0u64;
    let mut stopped = false;

    while eng.samples < params.max_steps {
        let path = bli_select_path(dag, root, params.epsilon);
        let frontier = *path.last().unwrap();
        let fresh = path.iter().copied().find(|s| !dag.is_terminal(*s) && !initialized.contains(s));
        if let (true, Some(s)) = (params.init_width > 0, fresh) {
            initialized.insert(s);
            let before = dag.leaf_count();
            let n = initialize_frontier(dag, domain, s, params.init_width, eng.scorer, eng.rng)?;
            initialized_nodes += n as u64;
            eng.after_insert(dag, before)?;
            continue;
        }
        // a stage with one realized child is trivially solved; give every
        // stage on the chain a real choice before trusting it
        if let Some(&thin) = path.iter().find(|&&s| needs_sibling(dag, domain, s)) {
            let before = dag.leaf_count();
            if add_child(dag, domain, thin, eng.scorer, eng.rng)?.is_none() {
                return Err(RunError::Stuck(thin));
            }
            eng.expansions += 1;
            eng.after_insert(dag, before)?;
            continue;
        }
        if bli_stop(dag, frontier) {
            stopped = true;
            break;
        }
        let clock = clocks.entry(frontier).or_insert(0);
        let t = *clock;
        *clock += 1;
        if expand_due(t, params.b) {
            eng.expand(dag, frontier)?;
        }
        let sel = bai_select(dag, frontier)?;
        eng.sample(dag, &path, sel.chosen)?;
        observer(&StepView { t: eng.samples, dag });
    }

    let leaf = bli_select(dag, root, params.epsilon);
    let leaf = if bli_stop(dag, leaf) { leaf } else { dag.representative_leaf(leaf) };
    let key = dag.key(leaf).clone();
    Ok(BliReport {
        leaf,
        n_features: domain.features(&key).len(),
        leaf_key: key,
        value_estimate: dag.stats(leaf).mean,
        samples: eng.samples,
        node_updates: eng.node_updates,
        naive_node_updates: eng.naive_node_updates,
        expansions: eng.expansions,
        initialized_nodes,
        stages: clocks.len(),
        dag_size: dag.len(),
        stopped,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
