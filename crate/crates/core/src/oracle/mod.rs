//! Leaf evaluators.
//!
//! An [`Oracle`] is queried with the state of a temporary leaf. Terminal
//! states are evaluated by the terminal oracle, every other temporary leaf by
//! the intermediate (rollout) oracle.

mod auc;
mod dataset;
mod fs;
mod knn;
mod synthetic;

pub use auc::auc_from_scores;
pub use dataset::{Dataset, DatasetError};
pub use fs::{intermediate_rollout, FsOracle, FsParams};
pub use knn::{knn_auc, knn_auc_full, knn_scores, KdTree, Neighbor, Projection};
pub use synthetic::{bernoulli_sample, sigmoid, sigmoid_mean, SyntheticOracle, SyntheticScores};

use rand::RngCore;
use thiserror::Error;

use crate::state::{FeatureSet, StateKey};

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("evaluation needs both classes, got only label {0}")]
    SingleClass(u8),
    #[error("k = {k} must be smaller than the number of examples {n}")]
    TooManyNeighbors { k: usize, n: usize },
    #[error("subsample size {m} exceeds the number of examples {n}")]
    SubsampleTooLarge { m: usize, n: usize },
    #[error("cannot evaluate the empty feature set")]
    EmptyFeatureSet,
    #[error("oracle produced {0}, outside [0, 1]")]
    OutOfRange(f64),
}

/// Result of one oracle call.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    /// The value is the leaf's exact mean; its interval may collapse.
    pub exact: bool,
    /// Features of the set that was actually scored (rollout endpoint), stop flag cleared.
    pub evaluated: FeatureSet,
}

pub trait Oracle {
    fn evaluate(
        &mut self,
        state: &StateKey,
        terminal: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Evaluation, OracleError>;
}
