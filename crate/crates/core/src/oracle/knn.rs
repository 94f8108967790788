//! k-nearest-neighbour scoring restricted to a feature subset.
//!
//! Both search paths compute squared distances with the same summation order,
//! so a kd-tree query and a linear scan agree bit for bit, including the
//! index tie-break.

use std::cmp::Ordering;

use rand::seq::index;
use rand::{Rng, RngCore};

use super::{auc_from_scores, Dataset, OracleError};
use crate::state::FeatureSet;

/// Above this many features the kd-tree stops paying for itself.
pub const KD_TREE_MAX_DIM: usize = 12;
const LEAF_SIZE: usize = 8;
const SINGLE_CLASS_RETRIES: usize = 10;

/// The dataset restricted to a feature subset, stored contiguously.
#[derive(Debug, Clone)]
pub struct Projection {
    dim: usize,
    n: usize,
    points: Vec<f64>,
}

impl Projection {
    pub fn new(data: &Dataset, features: &FeatureSet) -> Self {
        let cols = features.to_vec();
        let mut points = Vec::with_capacity(data.n_rows() * cols.len());
        for i in 0..data.n_rows() {
            let row = data.row(i);
            points.extend(cols.iter().map(|&f| row[f]));
        }
        Self { dim: cols.len(), n: data.n_rows(), points }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn dist2(&self, a: usize, b: usize) -> f64 {
        sq_dist(self.point(a), self.point(b))
    }

    /// The `k` nearest rows to row `query`, itself excluded, by a full scan.
    pub fn brute_knn(&self, query: usize, k: usize) -> Vec<Neighbor> {
        let mut best = Best::new(k);
        if k == 0 || self.dim == 0 {
            for i in (0..self.n).filter(|&i| i != query) {
                best.offer(Neighbor { dist: 0.0, index: i });
            }
            return best.items;
        }
        let q = self.point(query);
        for (i, p) in self.points.chunks_exact(self.dim).enumerate() {
            let dist = sq_dist(q, p);
            // rows arrive in index order, so an equal distance never displaces
            if (dist < best.worst() || !best.full()) && i != query {
                best.offer(Neighbor { dist, index: i });
            }
        }
        best.items
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub dist: f64,
    pub index: usize,
}

impl Neighbor {
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.index.cmp(&other.index))
    }
}

/// Sorted buffer of the best `k` candidates seen so far.
struct Best {
    k: usize,
    items: Vec<Neighbor>,
}

impl Best {
    fn new(k: usize) -> Self {
        Self { k, items: Vec::with_capacity(k + 1) }
    }

    fn full(&self) -> bool {
        self.items.len() == self.k
    }

    fn worst(&self) -> f64 {
        self.items.last().map_or(f64::INFINITY, |n| n.dist)
    }

    fn offer(&mut self, cand: Neighbor) {
        if self.full() && cand.cmp_key(self.items.last().unwrap()) != Ordering::Less {
            return;
        }
        let pos = self.items.partition_point(|n| n.cmp_key(&cand) == Ordering::Less);
        self.items.insert(pos, cand);
        self.items.truncate(self.k);
    }
}

#[derive(Debug, Clone)]
enum KdNode {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Bucketed kd-tree over the rows of a [`Projection`].
#[derive(Debug, Clone)]
pub struct KdTree {
    nodes: Vec<KdNode>,
    order: Vec<usize>,
}

impl KdTree {
    pub fn build(proj: &Projection) -> Self {
        let mut tree = Self { nodes: Vec::new(), order: (0..proj.len()).collect() };
        if proj.dim() > 0 && !proj.is_empty() {
            tree.build_node(proj, 0, proj.len(), 0);
        } else {
            tree.nodes.push(KdNode::Leaf { start: 0, end: proj.len() });
        }
        tree
    }

    fn build_node(&mut self, proj: &Projection, start: usize, end: usize, depth: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(KdNode::Leaf { start, end });
            return id;
        }
        let axis = depth % proj.dim();
        let mid = start + (end - start) / 2;
        let key = |&i: &usize| (proj.point(i)[axis], i);
        self.order[start..end].select_nth_unstable_by(mid - start, |a, b| {
            let (va, ia) = key(a);
            let (vb, ib) = key(b);
            va.total_cmp(&vb).then(ia.cmp(&ib))
        });
        let value = proj.point(self.order[mid])[axis];
        self.nodes.push(KdNode::Leaf { start, end });
        let left = self.build_node(proj, start, mid, depth + 1);
        let right = self.build_node(proj, mid, end, depth + 1);
        self.nodes[id] = KdNode::Split { axis, value, left, right };
        id
    }

    /// Same contract as [`Projection::brute_knn`].
    pub fn knn(&self, proj: &Projection, query: usize, k: usize) -> Vec<Neighbor> {
        let mut best = Best::new(k);
        if k > 0 {
            self.search(proj, 0, query, &mut best);
        }
        best.items
    }

    fn search(&self, proj: &Projection, node: usize, query: usize, best: &mut Best) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if i != query {
                        best.offer(Neighbor { dist: proj.dist2(query, i), index: i });
                    }
                }
            }
            KdNode::Split { axis, value, left, right } => {
                let q = proj.point(query)[axis];
                let (near, far) = if q < value { (left, right) } else { (right, left) };
                self.search(proj, near, query, best);
                let d = q - value;
                // points on the far side lie at least this far away; equal
                // distances must still be visited for the index tie-break
                if !(best.full() && d * d > best.worst()) {
                    self.search(proj, far, query, best);
                }
            }
        }
    }
}

/// Number of positive labels among the `k` nearest neighbours of each query.
pub fn knn_scores(data: &Dataset, features: &FeatureSet, queries: &[usize], k: usize) -> Vec<u32> {
    let proj = Projection::new(data, features);
    let labels = data.labels();
    let count = |ns: Vec<Neighbor>| ns.iter().map(|n| labels[n.index] as u32).sum();
    // building the tree only pays off when most rows are queried
    if proj.dim() <= KD_TREE_MAX_DIM && 2 * queries.len() >= proj.len() {
        let tree = KdTree::build(&proj);
        queries.iter().map(|&q| count(tree.knn(&proj, q, k))).collect()
    } else {
        queries.iter().map(|&q| count(proj.brute_knn(q, k))).collect()
    }
}

/// AUC of the k-NN positive-count score on a random subsample of `m` rows.
/// Neighbours are searched among all rows; `m == n` uses every row and
/// consumes no randomness.
pub fn knn_auc(
    data: &Dataset,
    features: &FeatureSet,
    m: usize,
    k: usize,
    rng: &mut dyn RngCore,
) -> Result<f64, OracleError> {
    let n = data.n_rows();
    if features.is_empty() {
        return Err(OracleError::EmptyFeatureSet);
    }
    if k >= n {
        return Err(OracleError::TooManyNeighbors { k, n });
    }
    if m > n {
        return Err(OracleError::SubsampleTooLarge { m, n });
    }
    let queries = subsample(data, m, rng)?;
    auc_on(data, features, &queries, k)
}

/// [`knn_auc`] with every row as a query; deterministic.
pub fn knn_auc_full(data: &Dataset, features: &FeatureSet, k: usize) -> Result<f64, OracleError> {
    let n = data.n_rows();
    if features.is_empty() {
        return Err(OracleError::EmptyFeatureSet);
    }
    if k >= n {
        return Err(OracleError::TooManyNeighbors { k, n });
    }
    auc_on(data, features, &(0..n).collect::<Vec<_>>(), k)
}

fn auc_on(data: &Dataset, features: &FeatureSet, queries: &[usize], k: usize) -> Result<f64, OracleError> {
    let scores = knn_scores(data, features, queries, k);
    let labels: Vec<u8> = queries.iter().map(|&q| data.label(q)).collect();
    auc_from_scores(&scores, &labels)
}

fn subsample(data: &Dataset, m: usize, rng: &mut dyn RngCore) -> Result<Vec<usize>, OracleError> {
    let n = data.n_rows();
    if m == n {
        return Ok((0..n).collect());
    }
    let two_classes = |idx: &[usize]| idx.iter().any(|&i| data.label(i) == 1) && idx.iter().any(|&i| data.label(i) == 0);
    for _ in 0..SINGLE_CLASS_RETRIES {
        let idx = index::sample(rng, n, m).into_vec();
        if two_classes(&idx) {
            return Ok(idx);
        }
    }
    // one example of each class, the rest uniformly among the remainder
    if m < 2 {
        return Err(OracleError::SingleClass(data.label(0)));
    }
    let pos: Vec<usize> = (0..n).filter(|&i| data.label(i) == 1).collect();
    let neg: Vec<usize> = (0..n).filter(|&i| data.label(i) == 0).collect();
    let p = pos[rng.random_range(0..pos.len())];
    let q = neg[rng.random_range(0..neg.len())];
    let rest: Vec<usize> = (0..n).filter(|&i| i != p && i != q).collect();
    let mut idx = vec![p, q];
    idx.extend(index::sample(rng, rest.len(), m - 2).into_iter().map(|j| rest[j]));
    Ok(idx)
}
