//! Expansion-rate sweep on a flat-valued domain, paired with the
//! growth-limited bound for each `b`.

use dagbandit::theory::tau_max;
use dagbandit::{BetaKind, DomainSpec};
use serde::{Deserialize, Serialize};

use crate::experiment::{run_experiment, Algorithm, ConfigError, ExperimentConfig, Moments, OracleSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub b: f64,
    pub reps: usize,
    pub failed: usize,
    pub stopped: usize,
    pub samples: Moments,
    pub expansions: Moments,
    pub tau_max: Option<f64>,
    pub tau_max_closed_form: Option<f64>,
}

/// Root plus `n_features` children, every state worth `sig(0) = 0.5`.
pub fn flat_config(n_features: usize, epsilon: f64, delta: f64, reps: usize, base_seed: u64) -> ExperimentConfig {
    let domain = DomainSpec::FixedLattice { n_features, leaf_depth: n_features };
    ExperimentConfig {
        init_depth: 1,
        epsilon,
        delta,
        beta: BetaKind::Theory,
        reps,
        base_seed,
        ..ExperimentConfig::synthetic(Algorithm::Bai, domain, vec![0.0; n_features])
    }
}

/// Mean stopping time per `b` next to `τ_max(δ, ε, b)`. The domain must be
/// flat, so the gap entering the bound is `ε`.
pub fn sweep_b(cfg: &ExperimentConfig, b_values: &[f64]) -> Result<Vec<SweepRow>, ConfigError> {
    match &cfg.oracle {
        OracleSpec::Synthetic { scores } if scores.iter().all(|&s| s == scores[0]) => {}
        _ => return Err(ConfigError::Invalid("the sweep needs a flat synthetic domain".into())),
    }
    if !(cfg.epsilon > 0.0) {
        return Err(ConfigError::Invalid("the sweep needs ε > 0 on a flat domain".into()));
    }
    let mut rows = Vec::with_capacity(b_values.len());
    for &b in b_values {
        let report = run_experiment(&ExperimentConfig { b, ..cfg.clone() })?;
        let bound = if b > 0.0 && b < 1.0 {
            tau_max(cfg.delta, cfg.epsilon, b).map_err(|e| ConfigError::Invalid(e.to_string()))?
        } else {
            None
        };
        let a = report.aggregate;
        rows.push(SweepRow {
            b,
            reps: a.runs,
            failed: a.failed,
            stopped: a.stopped,
            samples: a.samples,
            expansions: a.expansions,
            tau_max: bound.map(|t| t.exact),
            tau_max_closed_form: bound.map(|t| t.closed_form),
        });
    }
    Ok(rows)
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = format!("{:>6} {:>14} {:>12} {:>10} {:>16} {:>16}\n", "b", "mean τ", "sd", "expand", "τ_max", "closed form");
    for r in rows {
        let fmt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.1}"));
        out += &format!(
            "{:>6.3} {:>14.1} {:>12.1} {:>10.1} {:>16} {:>16}\n",
            r.b,
            r.samples.mean,
            r.samples.sd,
            r.expansions.mean,
            fmt(r.tau_max),
            fmt(r.tau_max_closed_form)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_flat_sweep() {
        let cfg = ExperimentConfig { jobs: 2, ..flat_config(4, 0.2, 0.1, 2, 0) };
        let rows = sweep_b(&cfg, &[0.3, 0.5]).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.failed == 0 && r.stopped == 2 && r.tau_max.is_some()));
    }

    #[test]
    fn rejects_non_flat() {
        let mut cfg = flat_config(4, 0.2, 0.1, 1, 0);
        cfg.oracle = OracleSpec::Synthetic { scores: vec![0.0, 0.1, 0.0, 0.0] };
        assert!(sweep_b(&cfg, &[0.3]).is_err());
    }
}
