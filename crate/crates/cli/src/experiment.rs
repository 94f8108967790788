//! Seeded replications of one algorithm on one domain, with JSON-lines
//! records and aggregate statistics.

use std::io::{self, Write};
use std::path::PathBuf;

use dagbandit::bai::{run_bai, BaiParams, UniformScorer};
use dagbandit::bli::{run_bli, BliParams};
use dagbandit::fuse::{run_fuse, FuseParams};
use dagbandit::oracle::{knn_auc_full, sigmoid_mean, Dataset, DatasetError, FsOracle, FsParams, SyntheticOracle, SyntheticScores};
use dagbandit::rave::RaveScorer;
use dagbandit::{BetaKind, DomainSpec, ExplorationFn, FeatureSet, SearchDag};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gen::gen_linear;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Bai,
    Bli,
    Fuse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DataSource {
    Csv { path: PathBuf },
    Madelon { data: PathBuf, labels: PathBuf },
    Linear { seed: u64 },
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset, ConfigError> {
        Ok(match self {
            DataSource::Csv { path } => Dataset::from_csv_path(path)?,
            DataSource::Madelon { data, labels } => Dataset::from_madelon_paths(data, labels)?,
            DataSource::Linear { seed } => gen_linear(*seed),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OracleSpec {
    /// Bernoulli leaves with mean `sig(Σ scores)`.
    Synthetic { scores: Vec<f64> },
    /// k-NN AUC on a dataset.
    Dataset { source: DataSource, m: usize, k: usize, q: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub domain: DomainSpec,
    /// Depth to which `D_0` is built before a BAI run.
    pub init_depth: usize,
    pub oracle: OracleSpec,
    pub epsilon: f64,
    pub delta: f64,
    pub b: f64,
    pub beta: BetaKind,
    pub init_width: usize,
    pub c_l: f64,
    pub max_steps: u64,
    /// FUSE iterations.
    pub budget: u64,
    pub fuse_b: f64,
    pub fuse_c: f64,
    pub reps: usize,
    pub base_seed: u64,
    pub jobs: usize,
}

impl ExperimentConfig {
    /// Defaults for a dataset run: m = 50, k = 5, q = 0.9, b = 0.3, ε = 0.005, δ = 0.1.
    pub fn feature_selection(algorithm: Algorithm, source: DataSource, n_features: usize) -> Self {
        Self {
            algorithm,
            domain: DomainSpec::FeatureLattice { n_features },
            init_depth: 0,
            oracle: OracleSpec::Dataset { source, m: 50, k: 5, q: 0.9 },
            epsilon: 0.005,
            delta: 0.1,
            b: 0.3,
            beta: BetaKind::Practical,
            init_width: 7,
            c_l: dagbandit::rave::DEFAULT_C_L,
            max_steps: BaiParams::DEFAULT_MAX_STEPS,
            budget: 10_000,
            fuse_b: 0.5,
            fuse_c: std::f64::consts::SQRT_2,
            reps: 1,
            base_seed: 0,
            jobs: 1,
        }
    }

    /// Defaults for a synthetic-score run on `domain`.
    pub fn synthetic(algorithm: Algorithm, domain: DomainSpec, scores: Vec<f64>) -> Self {
        Self {
            init_depth: match domain {
                DomainSpec::FixedLattice { leaf_depth, .. } | DomainSpec::FixedTree { leaf_depth, .. } => leaf_depth,
                DomainSpec::FeatureLattice { .. } => 0,
            },
            domain,
            oracle: OracleSpec::Synthetic { scores },
            epsilon: 0.0,
            b: 0.0,
            ..Self::feature_selection(algorithm, DataSource::Linear { seed: 0 }, 0)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.epsilon >= 0.0) {
            return bad(format!("epsilon must be nonnegative, got {}", self.epsilon));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return bad(format!("b must lie in [0, 1], got {}", self.b));
        }
        let n = self.domain.n_features();
        match &self.oracle {
            OracleSpec::Synthetic { scores } => {
                if scores.len() != n {
                    return bad(format!("{} scores for a {n}-feature domain", scores.len()));
                }
                if self.algorithm == Algorithm::Fuse {
                    return bad("fuse needs a dataset".into());
                }
            }
            OracleSpec::Dataset { source, k, q, .. } => {
                if !matches!(self.domain, DomainSpec::FeatureLattice { .. }) {
                    return bad("dataset oracles run on the feature lattice".into());
                }
                if *k == 0 || !(0.0..=1.0).contains(q) {
                    return bad(format!("need k ≥ 1 and q ∈ [0, 1], got k={k} q={q}"));
                }
                match source {
                    DataSource::Csv { path } if !path.exists() => {
                        return bad(format!("dataset {} not found", path.display()))
                    }
                    DataSource::Madelon { data, labels } if !data.exists() || !labels.exists() => {
                        return bad(format!("madelon files {} / {} not found", data.display(), labels.display()))
                    }
                    _ => {}
                }
            }
        }
        if self.algorithm == Algorithm::Bai && matches!(self.domain, DomainSpec::FeatureLattice { .. }) && self.init_depth == 0 {
            return bad("a BAI run needs an initial DAG deeper than the root".into());
        }
        Ok(())
    }

    fn exploration(&self) -> ExplorationFn {
        ExplorationFn { kind: self.beta, delta: self.delta }
    }
}

/// One replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub rep: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub error: Option<String>,
    pub samples: u64,
    pub node_updates: u64,
    pub naive_node_updates: u64,
    pub expansions: u64,
    pub recommendation: String,
    pub features: Vec<usize>,
    pub n_features: usize,
    pub value_estimate: Option<f64>,
    /// Leaf mean for synthetic oracles, full-data AUC for datasets.
    pub true_value: Option<f64>,
    pub stopped: bool,
    pub wall_time_s: f64,
}

impl RunRecord {
    fn failed(rep: usize, seed: u64, algorithm: Algorithm, err: String) -> Self {
        Self {
            rep,
            seed,
            algorithm,
            error: Some(err),
            samples: 0,
            node_updates: 0,
            naive_node_updates: 0,
            expansions: 0,
            recommendation: String::new(),
            features: Vec::new(),
            n_features: 0,
            value_estimate: None,
            true_value: None,
            stopped: false,
            wall_time_s: 0.0,
        }
    }

    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
}

impl Moments {
    pub fn of(xs: impl IntoIterator<Item = f64>) -> Self {
        let xs: Vec<f64> = xs.into_iter().collect();
        if xs.is_empty() {
            return Self::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Self { mean, sd: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub failed: usize,
    pub stopped: usize,
    pub samples: Moments,
    pub node_updates: Moments,
    pub naive_node_updates: Moments,
    pub expansions: Moments,
    pub n_features: Moments,
    pub true_value: Option<Moments>,
}

impl Aggregate {
    pub fn of(records: &[RunRecord]) -> Self {
        let ok: Vec<&RunRecord> = records.iter().filter(|r| r.ok()).collect();
        let field = |f: fn(&RunRecord) -> f64| Moments::of(ok.iter().map(|r| f(r)));
        let values: Vec<f64> = ok.iter().filter_map(|r| r.true_value).collect();
        Self {
            runs: records.len(),
            failed: records.len() - ok.len(),
            stopped: ok.iter().filter(|r| r.stopped).count(),
            samples: field(|r| r.samples as f64),
            node_updates: field(|r| r.node_updates as f64),
            naive_node_updates: field(|r| r.naive_node_updates as f64),
            expansions: field(|r| r.expansions as f64),
            n_features: field(|r| r.n_features as f64),
            true_value: (!values.is_empty()).then(|| Moments::of(values)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub records: Vec<RunRecord>,
    pub aggregate: Aggregate,
}

impl RunReport {
    pub fn all_failed(&self) -> bool {
        self.aggregate.failed == self.aggregate.runs
    }

    /// One JSON object per record.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let a = &self.aggregate;
        let mut out = format!("runs {:>6}   failed {:>4}   stopped {:>4}\n", a.runs, a.failed, a.stopped);
        let rows = [
            ("samples", a.samples),
            ("node updates", a.node_updates),
            ("naive updates", a.naive_node_updates),
            ("expansions", a.expansions),
            ("features", a.n_features),
        ];
        for (name, m) in rows.into_iter().chain(a.true_value.map(|m| ("value", m))) {
            out += &format!("{name:<14} mean {:>14.4}   sd {:>14.4}\n", m.mean, m.sd);
        }
        out
    }
}

/// Run every replication, `jobs` at a time.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport, ConfigError> {
    cfg.validate()?;
    let data = match &cfg.oracle {
        OracleSpec::Dataset { source, .. } => Some(source.load()?),
        OracleSpec::Synthetic { .. } => None,
    };
    if let (Some(d), DomainSpec::FeatureLattice { n_features }) = (&data, &cfg.domain) {
        if d.n_features() != *n_features {
            return Err(ConfigError::Invalid(format!(
                "dataset has {} features, domain {n_features}",
                d.n_features()
            )));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let records: Vec<RunRecord> =
        pool.install(|| (0..cfg.reps).into_par_iter().map(|rep| run_one(cfg, data.as_ref(), rep)).collect());
    let aggregate = Aggregate::of(&records);
    Ok(RunReport { records, aggregate })
}

/// Replication `rep`, seeded with `base_seed + rep`.
pub fn run_one(cfg: &ExperimentConfig, data: Option<&Dataset>, rep: usize) -> RunRecord {
    let seed = cfg.base_seed.wrapping_add(rep as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let result = match (&cfg.oracle, data) {
        (OracleSpec::Synthetic { scores }, _) => run_synthetic(cfg, scores, &mut rng),
        (OracleSpec::Dataset { m, k, q, .. }, Some(data)) => {
            run_dataset(cfg, data, FsParams { m: *m, k: *k, q: *q }, &mut rng)
        }
        (OracleSpec::Dataset { .. }, None) => Err("dataset not loaded".to_string()),
    };
    match result {
        Ok(mut r) => {
            r.rep = rep;
            r.seed = seed;
            r
        }
        Err(e) => RunRecord::failed(rep, seed, cfg.algorithm, e),
    }
}

fn base_record(cfg: &ExperimentConfig) -> RunRecord {
    RunRecord { error: None, ..RunRecord::failed(0, 0, cfg.algorithm, String::new()) }
}

fn run_synthetic(cfg: &ExperimentConfig, scores: &[f64], rng: &mut ChaCha8Rng) -> Result<RunRecord, String> {
    let domain = &cfg.domain;
    let mut oracle = SyntheticOracle::new(scores.to_vec());
    let table = SyntheticScores(scores.to_vec());
    let mut rec = base_record(cfg);
    match cfg.algorithm {
        Algorithm::Bai => {
            let mut dag = SearchDag::build_to_depth(domain, cfg.init_depth);
            let params = BaiParams { epsilon: cfg.epsilon, beta: cfg.exploration(), b: cfg.b, max_steps: cfg.max_steps };
            let r = run_bai(&mut dag, domain, &mut oracle, &mut UniformScorer, &params, rng, &mut |_| {})
                .map_err(|e| e.to_string())?;
            rec.samples = r.samples;
            rec.node_updates = r.node_updates;
            rec.naive_node_updates = r.naive_node_updates;
            rec.expansions = r.expansions;
            rec.features = domain.features(&r.recommended_key).to_vec();
            rec.recommendation = r.recommended_key.to_string();
            rec.stopped = r.stopped;
            rec.wall_time_s = r.wall_time_s;
        }
        Algorithm::Bli => {
            let mut dag = SearchDag::build_to_depth(domain, cfg.init_depth);
            let params = BliParams {
                epsilon: cfg.epsilon,
                beta: cfg.exploration(),
                b: cfg.b,
                max_steps: cfg.max_steps,
                init_width: cfg.init_width,
            };
            let r = run_bli(&mut dag, domain, &mut oracle, &mut UniformScorer, &params, rng, &mut |_| {})
                .map_err(|e| e.to_string())?;
            rec.samples = r.samples;
            rec.node_updates = r.node_updates;
            rec.naive_node_updates = r.naive_node_updates;
            rec.expansions = r.expansions;
            rec.features = domain.features(&r.leaf_key).to_vec();
            rec.n_features = r.n_features;
            rec.value_estimate = Some(r.value_estimate);
            rec.true_value = Some(sigmoid_mean(&table, &r.leaf_key));
            rec.recommendation = r.leaf_key.to_string();
            rec.stopped = r.stopped;
            rec.wall_time_s = r.wall_time_s;
        }
        Algorithm::Fuse => return Err("fuse needs a dataset".into()),
    }
    if cfg.algorithm == Algorithm::Bai {
        rec.n_features = rec.features.len();
    }
    Ok(rec)
}

fn full_auc(data: &Dataset, features: &FeatureSet, k: usize) -> Result<f64, String> {
    if features.is_empty() {
        return Ok(0.0);
    }
    knn_auc_full(data, features, k).map_err(|e| e.to_string())
}

fn run_dataset(cfg: &ExperimentConfig, data: &Dataset, fs: FsParams, rng: &mut ChaCha8Rng) -> Result<RunRecord, String> {
    let domain = &cfg.domain;
    let n = data.n_features();
    let mut oracle = FsOracle::new(data, fs);
    let mut scorer = RaveScorer::new(n, cfg.c_l);
    let mut rec = base_record(cfg);
    match cfg.algorithm {
        Algorithm::Bli => {
            let mut dag = SearchDag::build_to_depth(domain, cfg.init_depth);
            let params = BliParams {
                epsilon: cfg.epsilon,
                beta: cfg.exploration(),
                b: cfg.b,
                max_steps: cfg.max_steps,
                init_width: cfg.init_width,
            };
            let r = run_bli(&mut dag, domain, &mut oracle, &mut scorer, &params, rng, &mut |_| {})
                .map_err(|e| e.to_string())?;
            let features = domain.features(&r.leaf_key);
            rec.samples = r.samples;
            rec.node_updates = r.node_updates;
            rec.naive_node_updates = r.naive_node_updates;
            rec.expansions = r.expansions;
            rec.true_value = Some(full_auc(data, &features, fs.k)?);
            rec.features = features.to_vec();
            rec.n_features = r.n_features;
            rec.value_estimate = Some(r.value_estimate);
            rec.recommendation = r.leaf_key.to_string();
            rec.stopped = r.stopped;
            rec.wall_time_s = r.wall_time_s;
        }
        Algorithm::Fuse => {
            let params = FuseParams { budget: cfg.budget, b: cfg.fuse_b, c: cfg.fuse_c, c_l: cfg.c_l };
            let r = run_fuse(domain, &mut oracle, &params, rng).map_err(|e| e.to_string())?;
            let features = domain.features(&r.leaf_key);
            rec.samples = r.samples;
            rec.true_value = Some(full_auc(data, &features, fs.k)?);
            rec.features = r.features;
            rec.n_features = r.n_features;
            rec.value_estimate = Some(r.value_estimate);
            rec.recommendation = r.leaf_key.to_string();
            rec.wall_time_s = r.wall_time_s;
        }
        Algorithm::Bai => {
            let mut dag = SearchDag::build_to_depth(domain, cfg.init_depth);
            let params = BaiParams { epsilon: cfg.epsilon, beta: cfg.exploration(), b: cfg.b, max_steps: cfg.max_steps };
            let r = run_bai(&mut dag, domain, &mut oracle, &mut scorer, &params, rng, &mut |_| {})
                .map_err(|e| e.to_string())?;
            rec.samples = r.samples;
            rec.node_updates = r.node_updates;
            rec.naive_node_updates = r.naive_node_updates;
            rec.expansions = r.expansions;
            rec.features = domain.features(&r.recommended_key).to_vec();
            rec.n_features = rec.features.len();
            rec.recommendation = r.recommended_key.to_string();
            rec.stopped = r.stopped;
            rec.wall_time_s = r.wall_time_s;
        }
    }
    Ok(rec)
}

/// Drop wall times so two reports can be compared byte for byte.
pub fn without_timing(records: &[RunRecord]) -> Vec<RunRecord> {
    records.iter().map(|r| RunRecord { wall_time_s: 0.0, ..r.clone() }).collect()
}
