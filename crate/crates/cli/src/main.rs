use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dagbandit::oracle::{sigmoid_mean, SyntheticScores};
use dagbandit::theory::{summarize, tau_max, GapConvention, ValueMap};
use dagbandit::{BetaKind, DomainSpec};
use dagbandit_cli::experiment::{run_experiment, Algorithm, ConfigError, DataSource, ExperimentConfig, OracleSpec, RunReport};
use dagbandit_cli::gen::gen_linear;
use dagbandit_cli::sweep::{flat_config, sweep_b, sweep_table};
use serde_json::json;

const EXIT_CONFIG: u8 = 1;
const EXIT_ALL_FAILED: u8 = 2;

#[derive(Parser)]
#[command(name = "dagbandit", version, about = "Monte-Carlo search in growing DAGs: experiments and bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Base seed; replication i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Replications run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// JSON-lines report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// CSV with a header row and the label in a last column named `y`.
    #[arg(long, conflicts_with_all = ["madelon_data", "linear"])]
    dataset: Option<PathBuf>,
    #[arg(long, requires = "madelon_labels")]
    madelon_data: Option<PathBuf>,
    #[arg(long, requires = "madelon_data")]
    madelon_labels: Option<PathBuf>,
    /// Generate the linear dataset in memory from this seed.
    #[arg(long)]
    linear: Option<u64>,
    #[arg(long, default_value_t = 50)]
    m: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 0.9)]
    q: f64,
}

impl DataArgs {
    fn source(&self) -> Option<DataSource> {
        if let Some(path) = &self.dataset {
            return Some(DataSource::Csv { path: path.clone() });
        }
        if let (Some(data), Some(labels)) = (&self.madelon_data, &self.madelon_labels) {
            return Some(DataSource::Madelon { data: data.clone(), labels: labels.clone() });
        }
        self.linear.map(|seed| DataSource::Linear { seed })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainKind {
    /// Subset lattice with leaves at depth d_L.
    Lattice,
    /// Redundant tree of move sequences with leaves at depth d_L.
    Tree,
    /// Feature lattice with a stopping feature.
    Fs,
}

#[derive(Args, Clone)]
struct SyntheticArgs {
    #[arg(long, value_enum, default_value = "lattice")]
    domain: DomainKind,
    /// Feature scores, comma separated, or a file holding them.
    #[arg(long, allow_hyphen_values = true, default_value = "-0.3,0,0.03,0.3,0.4,0.5")]
    scores: String,
    #[arg(long = "d-l", default_value_t = 3)]
    d_l: usize,
}

impl SyntheticArgs {
    fn scores(&self) -> Result<Vec<f64>, ConfigError> {
        let path = PathBuf::from(&self.scores);
        let text = if path.is_file() { std::fs::read_to_string(&path)? } else { self.scores.clone() };
        text.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|e| ConfigError::Invalid(format!("score '{s}': {e}"))))
            .collect()
    }

    fn domain(&self, n: usize) -> DomainSpec {
        match self.domain {
            DomainKind::Lattice => DomainSpec::FixedLattice { n_features: n, leaf_depth: self.d_l },
            DomainKind::Tree => DomainSpec::FixedTree { n_features: n, leaf_depth: self.d_l },
            DomainKind::Fs => DomainSpec::FeatureLattice { n_features: n },
        }
    }
}

#[derive(Args, Clone)]
struct SearchArgs {
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long)]
    b: Option<f64>,
    /// theory (beta1) or practical (beta2).
    #[arg(long)]
    beta: Option<BetaKind>,
    #[arg(long)]
    max_steps: Option<u64>,
}

impl SearchArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        cfg.delta = self.delta;
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        if let Some(b) = self.b {
            cfg.b = b;
        }
        if let Some(beta) = self.beta {
            cfg.beta = beta;
        }
        if let Some(m) = self.max_steps {
            cfg.max_steps = m;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the linear dataset as CSV.
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Best-arm identification among the root's children.
    Bai {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        synthetic: SyntheticArgs,
        #[command(flatten)]
        search: SearchArgs,
        /// Depth of the initial DAG; defaults to d_L (a fixed DAG).
        #[arg(long)]
        init_depth: Option<usize>,
    },
    /// Best-leaf identification, on a dataset or a synthetic feature lattice.
    Bli {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Synthetic scores when no dataset is given.
        #[arg(long, allow_hyphen_values = true)]
        scores: Option<String>,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long, default_value_t = 7)]
        init_width: usize,
        #[arg(long, default_value_t = 100.0)]
        c_l: f64,
    },
    /// The FUSE baseline on a dataset.
    Fuse {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        budget: u64,
        /// Progressive-widening exponent.
        #[arg(long, default_value_t = 0.5)]
        widening: f64,
        #[arg(long, default_value_t = std::f64::consts::SQRT_2)]
        c: f64,
        #[arg(long, default_value_t = 100.0)]
        c_l: f64,
    },
    /// Exact complexity terms and bounds for a synthetic domain.
    Theory {
        #[command(flatten)]
        synthetic: SyntheticArgs,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long)]
        b: Option<f64>,
        /// Leave ℓ itself out of Δ_ℓ.
        #[arg(long)]
        ancestors_only: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stopping time against τ_max over expansion rates, on a flat domain.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0.3,0.35,0.4")]
        b_values: Vec<f64>,
        #[arg(long, default_value_t = 15)]
        n_features: usize,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value = "theory")]
        beta: BetaKind,
        #[arg(long)]
        max_steps: Option<u64>,
    },
}

enum Failure {
    Config(String),
    AllFailed,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn sink(out: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn finish(report: &RunReport, common: &Common) -> Result<(), Failure> {
    let mut w = sink(&common.out)?;
    report.write_jsonl(&mut w)?;
    w.flush()?;
    for r in report.records.iter().filter(|r| !r.ok()) {
        eprintln!("rep {} (seed {}): {}", r.rep, r.seed, r.error.as_deref().unwrap_or(""));
    }
    eprint!("{}", report.summary());
    if report.all_failed() {
        return Err(Failure::AllFailed);
    }
    Ok(())
}

fn with_common(mut cfg: ExperimentConfig, common: &Common) -> ExperimentConfig {
    cfg.reps = common.reps;
    cfg.jobs = common.jobs;
    cfg.base_seed = common.seed;
    cfg
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gen { common } => {
            let data = gen_linear(common.seed);
            let mut w = sink(&common.out)?;
            data.write_csv(&mut w).map_err(ConfigError::from)?;
            w.flush()?;
        }
        Command::Bai { common, synthetic, search, init_depth } => {
            let scores = synthetic.scores()?;
            let domain = synthetic.domain(scores.len());
            let mut cfg = with_common(ExperimentConfig::synthetic(Algorithm::Bai, domain, scores), &common);
            if let Some(d) = init_depth {
                cfg.init_depth = d;
            }
            search.apply(&mut cfg);
            finish(&run_experiment(&cfg)?, &common)?;
        }
        Command::Bli { common, data, scores, search, init_width, c_l } => {
            let mut cfg = match (data.source(), scores) {
                (Some(source), None) => {
                    let n = source.load()?.n_features();
                    let mut cfg = ExperimentConfig::feature_selection(Algorithm::Bli, source, n);
                    cfg.oracle = match cfg.oracle {
                        OracleSpec::Dataset { source, .. } => OracleSpec::Dataset { source, m: data.m, k: data.k, q: data.q },
                        other => other,
                    };
                    cfg
                }
                (None, Some(s)) => {
                    let scores = SyntheticArgs { domain: DomainKind::Fs, scores: s, d_l: 0 }.scores()?;
                    let domain = DomainSpec::FeatureLattice { n_features: scores.len() };
                    ExperimentConfig { b: 0.3, epsilon: 0.005, ..ExperimentConfig::synthetic(Algorithm::Bli, domain, scores) }
                }
                _ => return Err(Failure::Config("give exactly one of a dataset or --scores".into())),
            };
            cfg = with_common(cfg, &common);
            cfg.init_width = init_width;
            cfg.c_l = c_l;
            search.apply(&mut cfg);
            finish(&run_experiment(&cfg)?, &common)?;
        }
        Command::Fuse { common, data, budget, widening, c, c_l } => {
            let source = data.source().ok_or_else(|| Failure::Config("fuse needs a dataset".into()))?;
            let n = source.load()?.n_features();
            let mut cfg = with_common(ExperimentConfig::feature_selection(Algorithm::Fuse, source.clone(), n), &common);
            cfg.oracle = OracleSpec::Dataset { source, m: data.m, k: data.k, q: data.q };
            cfg.budget = budget;
            cfg.fuse_b = widening;
            cfg.fuse_c = c;
            cfg.c_l = c_l;
            finish(&run_experiment(&cfg)?, &common)?;
        }
        Command::Theory { synthetic, epsilon, delta, b, ancestors_only, out } => {
            let scores = synthetic.scores()?;
            let domain = synthetic.domain(scores.len());
            let table = SyntheticScores(scores);
            let values = ValueMap::build(&domain, |s| sigmoid_mean(&table, s)).map_err(|e| Failure::Config(e.to_string()))?;
            let convention = if ancestors_only { GapConvention::AncestorsOnly } else { GapConvention::Path };
            let s = summarize(&values, epsilon, delta, convention).map_err(|e| Failure::Config(e.to_string()))?;
            let gap = s.delta_star.unwrap_or(0.0).max(epsilon);
            let bound = match b {
                Some(b) => tau_max(delta, gap, b).map_err(|e| Failure::Config(e.to_string()))?,
                None => None,
            };
            println!("leaves      {}", s.leaf_count);
            println!("delta_star  {}", s.delta_star.map_or("undefined".into(), |d| format!("{d:.6}")));
            println!("H_eps       {:.4}", s.h_eps);
            println!("tau_ub      {:.1}", s.tau_ub);
            println!("second_term {}", s.second_term.map_or("undefined".into(), |t| format!("{t:.1}")));
            if let Some(t) = bound {
                println!("tau_max     {:.1}", t.exact);
                println!("tau_max_cf  {:.1}", t.closed_form);
            } else if b.is_some() {
                println!("tau_max     inapplicable");
            }
            if let Some(path) = out {
                let record = json!({
                    "summary": s,
                    "convention": convention,
                    "epsilon": epsilon,
                    "delta": delta,
                    "b": b,
                    "tau_max": bound,
                });
                let mut w = sink(&Some(path))?;
                serde_json::to_writer(&mut w, &record).map_err(io::Error::from)?;
                w.write_all(b"\n")?;
                w.flush()?;
            }
        }
        Command::Sweep { common, b_values, n_features, epsilon, delta, beta, max_steps } => {
            let mut cfg = flat_config(n_features, epsilon, delta, common.reps, common.seed);
            cfg.jobs = common.jobs;
            cfg.beta = beta;
            if let Some(m) = max_steps {
                cfg.max_steps = m;
            }
            let rows = sweep_b(&cfg, &b_values)?;
            let mut w = sink(&common.out)?;
            for r in &rows {
                serde_json::to_writer(&mut w, r).map_err(io::Error::from)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
            eprint!("{}", sweep_table(&rows));
            if rows.iter().all(|r| r.failed == r.reps) {
                return Err(Failure::AllFailed);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::AllFailed) => {
            eprintln!("error: every replication failed");
            ExitCode::from(EXIT_ALL_FAILED)
        }
    }
}
