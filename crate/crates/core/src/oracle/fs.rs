use std::collections::HashMap;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{knn_auc, knn_auc_full, Dataset, Evaluation, Oracle, OracleError};
use crate::state::{FeatureSet, StateKey};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FsParams {
    /// Subsample size for intermediate evaluations.
    pub m: usize,
    /// Neighbour count.
    pub k: usize,
    /// Rollout continuation parameter.
    pub q: f64,
}

impl Default for FsParams {
    fn default() -> Self {
        Self { m: 50, k: 5, q: 0.9 }
    }
}

/// Complete `features` at random: before each addition the stopping feature
/// is drawn with probability `1 - q^|F|`. Returns the terminal set.
pub fn intermediate_rollout(features: &FeatureSet, q: f64, n_features: usize, rng: &mut dyn RngCore) -> FeatureSet {
    let mut current = features.without_stop();
    let mut unused: Vec<usize> = (0..n_features).filter(|&f| !current.contains(f)).collect();
    while !unused.is_empty() {
        let p_stop = 1.0 - q.powi(current.len() as i32);
        if p_stop > 0.0 && rng.random_bool(p_stop.min(1.0)) {
            break;
        }
        let f = unused.swap_remove(rng.random_range(0..unused.len()));
        current.insert(f);
    }
    current.with_stop()
}

/// Feature-selection oracle: exact k-NN AUC for terminal sets, rollout plus
/// subsampled AUC for everything else.
#[derive(Debug, Clone)]
pub struct FsOracle<'a> {
    data: &'a Dataset,
    params: FsParams,
    terminal_cache: HashMap<FeatureSet, f64>,
}

impl<'a> FsOracle<'a> {
    pub fn new(data: &'a Dataset, params: FsParams) -> Self {
        Self { data, params, terminal_cache: HashMap::new() }
    }

    pub fn params(&self) -> FsParams {
        self.params
    }

    pub fn n_features(&self) -> usize {
        self.data.n_features()
    }

    /// AUC on the full dataset. The empty selection has a constant score
    /// and therefore no strictly ordered pair.
    pub fn terminal_value(&mut self, features: &FeatureSet) -> Result<f64, OracleError> {
        let key = features.without_stop();
        if let Some(&v) = self.terminal_cache.get(&key) {
            return Ok(v);
        }
        let v = if key.is_empty() {
            0.0
        } else {
            knn_auc_full(self.data, &key, self.params.k)?
        };
        self.terminal_cache.insert(key, v);
        Ok(v)
    }

    pub fn intermediate_value(
        &self,
        features: &FeatureSet,
        rng: &mut dyn RngCore,
    ) -> Result<(f64, FeatureSet), OracleError> {
        let done = intermediate_rollout(features, self.params.q, self.n_features(), rng).without_stop();
        if done.is_empty() {
            return Ok((0.0, done));
        }
        let m = self.params.m.min(self.data.n_rows());
        Ok((knn_auc(self.data, &done, m, self.params.k, rng)?, done))
    }
}

impl Oracle for FsOracle<'_> {
    fn evaluate(&mut self, state: &StateKey, terminal: bool, rng: &mut dyn RngCore) -> Result<Evaluation, OracleError> {
        let features = state.features(self.n_features());
        if terminal {
            let value = self.terminal_value(&features)?;
            Ok(Evaluation { value, exact: true, evaluated: features.without_stop() })
        } else {
            let (value, evaluated) = self.intermediate_value(&features, rng)?;
            Ok(Evaluation { value, exact: false, evaluated })
        }
    }
}
