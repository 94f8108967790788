use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{Evaluation, Oracle, OracleError};
use crate::state::StateKey;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One real score per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScores(pub Vec<f64>);

impl SyntheticScores {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `sig(sum of the scores of the selected features)`.
pub fn sigmoid_mean(scores: &SyntheticScores, state: &StateKey) -> f64 {
    let features = state.features(scores.len());
    sigmoid(features.iter().map(|f| scores.0[f]).sum())
}

pub fn bernoulli_sample(mu: f64, rng: &mut dyn RngCore) -> f64 {
    if rng.random::<f64>() < mu {
        1.0
    } else {
        0.0
    }
}

/// Bernoulli leaves with mean `sig(sum of scores)`. Temporary leaves that are
/// not terminal are sampled the same way from their own feature set.
#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    pub scores: SyntheticScores,
}

impl SyntheticOracle {
    pub fn new(scores: Vec<f64>) -> Self {
        Self { scores: SyntheticScores(scores) }
    }

    pub fn mean(&self, state: &StateKey) -> f64 {
        sigmoid_mean(&self.scores, state)
    }
}

impl Oracle for SyntheticOracle {
    fn evaluate(
        &mut self,
        state: &StateKey,
        _terminal: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Evaluation, OracleError> {
        Ok(Evaluation {
            value: bernoulli_sample(self.mean(state), rng),
            exact: false,
            evaluated: state.features(self.scores.len()).without_stop(),
        })
    }
}
