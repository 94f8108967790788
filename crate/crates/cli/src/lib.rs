//! Harness for the DAG bandit experiments: dataset generation, seeded
//! replications with JSON-lines reports, and the expansion-rate sweep.

// `!(x > 0.0)` style checks are meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod experiment;
pub mod gen;
pub mod sweep;

pub use experiment::{run_experiment, Algorithm, ConfigError, DataSource, ExperimentConfig, OracleSpec, RunRecord, RunReport};
pub use gen::gen_linear;
pub use sweep::{sweep_b, SweepRow};
