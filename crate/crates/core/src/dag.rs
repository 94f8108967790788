//! The explored single-rooted DAG with transposition sharing.
//!
//! Leaves carry sample statistics and confidence intervals; every internal
//! node stores the max over its children of both bounds, plus the child that
//! attains the max upper bound (its representative child). Node ids are
//! assigned in insertion order and a node is only ever linked to parents that
//! already exist, so increasing id order is a topological order. Bound
//! propagation relies on that: ancestors are recomputed in decreasing id
//! order, and a node whose bounds did not move stops the upward sweep.

use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};
use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{BoundsError, ExplorationFn};
use crate::domain::DomainSpec;
use crate::state::StateKey;

/// Lower bound reported by a leaf that was never sampled.
pub const UNVISITED_LOWER: f64 = -1.0;
/// Upper bound reported by a leaf that was never sampled.
pub const UNVISITED_UPPER: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DagError {
    #[error("state {0} is already in the DAG as {1}")]
    Duplicate(StateKey, NodeId),
    #[error("state {0} has no parent in the DAG")]
    NoParent(StateKey),
    #[error("node {0} is not a temporary leaf")]
    NotALeaf(NodeId),
    #[error("sample value {0} outside [0, 1]")]
    ValueOutOfRange(f64),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub n_samples: u64,
    pub mean: f64,
    /// Number of root-to-leaf traversals that went through this node.
    pub visits: u64,
    pub lower: f64,
    pub upper: f64,
    pub rep_child: Option<NodeId>,
    /// Set once a deterministic oracle has pinned the leaf's value.
    pub exact: bool,
}

impl Default for NodeStats {
    fn default() -> Self {
        Self {
            n_samples: 0,
            mean: 0.0,
            visits: 0,
            lower: UNVISITED_LOWER,
            upper: UNVISITED_UPPER,
            rep_child: None,
            exact: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub key: StateKey,
    pub parents: Vec<NodeId>,
    pub children: Vec<NodeId>,
    /// Member of the domain's terminal leaf set.
    pub terminal: bool,
    pub depth: usize,
    pub stats: NodeStats,
    ancestor_count: usize,
}

/// Bound recomputations triggered by one sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateCount {
    /// Nodes actually recomputed with early cutoff.
    pub recomputed: usize,
    /// The sampled leaf plus every one of its ancestors.
    pub naive: usize,
}

#[derive(Debug, Clone)]
pub struct SearchDag {
    nodes: Vec<Node>,
    index: HashMap<StateKey, NodeId>,
    temp_leaves: usize,
    initial_leaves: usize,
    inserted_after_seal: usize,
    stamp: Vec<u32>,
    epoch: u32,
}

impl SearchDag {
    /// A DAG holding only the domain root.
    pub fn new(domain: &DomainSpec) -> Self {
        let root_key = domain.root();
        let root = Node {
            terminal: domain.is_terminal(&root_key),
            depth: 0,
            key: root_key.clone(),
            parents: Vec::new(),
            children: Vec::new(),
            stats: NodeStats::default(),
            ancestor_count: 0,
        };
        let mut index = HashMap::new();
        index.insert(root_key, NodeId::ROOT);
        Self {
            nodes: vec![root],
            index,
            temp_leaves: 1,
            initial_leaves: 1,
            inserted_after_seal: 0,
            stamp: vec![0],
            epoch: 0,
        }
    }

    /// Every state of depth at most `max_depth`, inserted level by level.
    pub fn build_to_depth(domain: &DomainSpec, max_depth: usize) -> Self {
        let mut dag = Self::new(domain);
        let mut level = vec![domain.root()];
        for _ in 0..max_depth {
            let mut next = Vec::new();
            let mut seen = HashSet::new();
            for state in &level {
                for (_, child) in domain.children(state) {
                    if seen.insert(child.clone()) {
                        next.push(child);
                    }
                }
            }
            for child in &next {
                dag.insert_node(domain, child.clone()).expect("level-order insertion");
            }
            level = next;
        }
        dag.seal_initial();
        dag
    }

    /// Freeze the current leaf set as the initial leaves `L_0`.
    pub fn seal_initial(&mut self) {
        self.initial_leaves = self.temp_leaves;
        self.inserted_after_seal = 0;
    }

    pub fn root(&self) -> NodeId {
        NodeId::ROOT
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn stats(&self, id: NodeId) -> &NodeStats {
        &self.nodes[id.index()].stats
    }

    pub fn key(&self, id: NodeId) -> &StateKey {
        &self.nodes[id.index()].key
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.index()].children
    }

    pub fn parents(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.index()].parents
    }

    pub fn lookup(&self, key: &StateKey) -> Option<NodeId> {
        self.index.get(key).copied()
    }

    pub fn contains(&self, key: &StateKey) -> bool {
        self.index.contains_key(key)
    }

    pub fn ids(&self) -> impl DoubleEndedIterator<Item = NodeId> + ExactSizeIterator {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    /// Temporary leaf: no children in the explored DAG.
    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes[id.index()].children.is_empty()
    }

    pub fn is_terminal(&self, id: NodeId) -> bool {
        self.nodes[id.index()].terminal
    }

    /// `|L_t|`, the current number of temporary leaves.
    pub fn leaf_count(&self) -> usize {
        self.temp_leaves
    }

    /// `|L_0|`.
    pub fn initial_leaf_count(&self) -> usize {
        self.initial_leaves
    }

    /// `|L*_t|`: every node that has been a leaf since the DAG was sealed.
    pub fn explored_leaf_count(&self) -> usize {
        self.initial_leaves + self.inserted_after_seal
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids().filter(|&id| self.is_leaf(id))
    }

    pub fn width(&self, id: NodeId) -> f64 {
        let s = self.stats(id);
        s.upper - s.lower
    }

    /// Add `key` below every parent already present.
    pub fn insert_node(&mut self, domain: &DomainSpec, key: StateKey) -> Result<NodeId, DagError> {
        if let Some(&existing) = self.index.get(&key) {
            return Err(DagError::Duplicate(key, existing));
        }
        let mut parents: Vec<NodeId> =
            domain.parents(&key).iter().filter_map(|p| self.lookup(p)).collect();
        if parents.is_empty() {
            return Err(DagError::NoParent(key));
        }
        parents.sort_unstable();
        let id = NodeId(self.nodes.len() as u32);

        let mut ancestors = HashSet::new();
        let mut queue: VecDeque<NodeId> = parents.iter().copied().collect();
        while let Some(a) = queue.pop_front() {
            if ancestors.insert(a) {
                queue.extend(self.nodes[a.index()].parents.iter().copied());
            }
        }

        for &p in &parents {
            let parent = &mut self.nodes[p.index()];
            if parent.children.is_empty() {
                self.temp_leaves -= 1;
            }
            parent.children.push(id);
        }
        self.temp_leaves += 1;
        self.inserted_after_seal += 1;
        self.nodes.push(Node {
            terminal: domain.is_terminal(&key),
            depth: domain.depth(&key),
            key: key.clone(),
            parents: parents.clone(),
            children: Vec::new(),
            stats: NodeStats::default(),
            ancestor_count: ancestors.len(),
        });
        self.stamp.push(0);
        self.index.insert(key, id);
        self.propagate(&parents);
        Ok(id)
    }

    /// Follow representative children down to a temporary leaf.
    pub fn representative_leaf(&self, mut id: NodeId) -> NodeId {
        while let Some(next) = self.nodes[id.index()].stats.rep_child {
            id = next;
        }
        id
    }

    /// The nodes from `from` down to its representative leaf, inclusive.
    pub fn representative_path(&self, from: NodeId) -> Vec<NodeId> {
        let mut path = vec![from];
        let mut id = from;
        while let Some(next) = self.nodes[id.index()].stats.rep_child {
            path.push(next);
            id = next;
        }
        path
    }

    pub fn add_visit(&mut self, id: NodeId) {
        self.nodes[id.index()].stats.visits += 1;
    }

    /// Fold a stochastic observation into `leaf` and restore the bound fixpoint.
    pub fn record_sample(
        &mut self,
        leaf: NodeId,
        x: f64,
        beta: &ExplorationFn,
    ) -> Result<UpdateCount, DagError> {
        self.record(leaf, x, beta, false)
    }

    /// Record a value from a deterministic oracle: the interval collapses to it.
    pub fn record_exact(
        &mut self,
        leaf: NodeId,
        x: f64,
        beta: &ExplorationFn,
    ) -> Result<UpdateCount, DagError> {
        self.record(leaf, x, beta, true)
    }

    fn record(
        &mut self,
        leaf: NodeId,
        x: f64,
        beta: &ExplorationFn,
        exact: bool,
    ) -> Result<UpdateCount, DagError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(DagError::ValueOutOfRange(x));
        }
        if !self.is_leaf(leaf) {
            return Err(DagError::NotALeaf(leaf));
        }
        let leaf_count = self.temp_leaves;
        let node = &mut self.nodes[leaf.index()];
        let stats = &mut node.stats;
        stats.n_samples += 1;
        stats.mean += (x - stats.mean) / stats.n_samples as f64;
        stats.exact |= exact;
        let (lower, upper) = leaf_bounds(stats, beta, leaf_count)?;
        stats.lower = lower;
        stats.upper = upper;
        let naive = 1 + node.ancestor_count;
        let parents = node.parents.clone();
        let recomputed = 1 + self.propagate(&parents);
        Ok(UpdateCount { recomputed, naive })
    }

    /// Recompute every leaf interval and then every internal node. Needed
    /// when the exploration function depends on the leaf count and the leaf
    /// set just changed.
    pub fn refresh_bounds(&mut self, beta: &ExplorationFn) -> Result<usize, DagError> {
        let leaf_count = self.temp_leaves;
        for node in self.nodes.iter_mut().filter(|n| n.children.is_empty()) {
            let (lower, upper) = leaf_bounds(&node.stats, beta, leaf_count)?;
            node.stats.lower = lower;
            node.stats.upper = upper;
            node.stats.rep_child = None;
        }
        for i in (0..self.nodes.len()).rev() {
            if !self.nodes[i].children.is_empty() {
                self.recompute_internal(NodeId(i as u32));
            }
        }
        Ok(self.nodes.len())
    }

    /// Returns whether (L, U, rep_child) changed.
    fn recompute_internal(&mut self, id: NodeId) -> bool {
        let node = &self.nodes[id.index()];
        let mut lower = f64::NEG_INFINITY;
        let mut upper = f64::NEG_INFINITY;
        let mut rep = None;
        for &c in &node.children {
            let cs = &self.nodes[c.index()].stats;
            lower = lower.max(cs.lower);
            if cs.upper > upper {
                upper = cs.upper;
                rep = Some(c);
            }
        }
        let stats = &mut self.nodes[id.index()].stats;
        let changed = stats.lower != lower || stats.upper != upper || stats.rep_child != rep;
        stats.lower = lower;
        stats.upper = upper;
        stats.rep_child = rep;
        changed
    }

    /// Recompute `start` and their ancestors in reverse topological order,
    /// stopping wherever nothing changed. Returns the number of recomputed nodes.
    fn propagate(&mut self, start: &[NodeId]) -> usize {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        let mut heap: BinaryHeap<NodeId> = BinaryHeap::new();
        for &p in start {
            if self.stamp[p.index()] != self.epoch {
                self.stamp[p.index()] = self.epoch;
                heap.push(p);
            }
        }
        let mut count = 0;
        while let Some(id) = heap.pop() {
            count += 1;
            if self.recompute_internal(id) {
                for i in 0..self.nodes[id.index()].parents.len() {
                    let p = self.nodes[id.index()].parents[i];
                    if self.stamp[p.index()] != self.epoch {
                        self.stamp[p.index()] = self.epoch;
                        heap.push(p);
                    }
                }
            }
        }
        count
    }

    /// All nodes reachable from `from`, including it, in increasing id order.
    pub fn descendants(&self, from: NodeId) -> Vec<NodeId> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![from];
        seen[from.index()] = true;
        let mut out = Vec::new();
        while let Some(id) = stack.pop() {
            out.push(id);
            for &c in &self.nodes[id.index()].children {
                if !seen[c.index()] {
                    seen[c.index()] = true;
                    stack.push(c);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Edge list (`parent<TAB>child`), a blank line, then one stats row per node.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        for node in &self.nodes {
            for &c in &node.children {
                writeln!(w, "{}\t{}", node.key, self.key(c))?;
            }
        }
        writeln!(w)?;
        writeln!(w, "key\tN\tmean\tL\tU")?;
        for node in &self.nodes {
            let s = &node.stats;
            writeln!(w, "{}\t{}\t{:.6}\t{:.6}\t{:.6}", node.key, s.n_samples, s.mean, s.lower, s.upper)?;
        }
        Ok(())
    }
}

fn leaf_bounds(stats: &NodeStats, beta: &ExplorationFn, leaf_count: usize) -> Result<(f64, f64), BoundsError> {
    if stats.exact {
        Ok((stats.mean, stats.mean))
    } else if stats.n_samples == 0 {
        Ok((UNVISITED_LOWER, UNVISITED_UPPER))
    } else {
        beta.interval(stats.mean, stats.n_samples, leaf_count)
    }
}
