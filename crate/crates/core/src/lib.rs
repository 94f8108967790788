//! Monte-Carlo search in growing single-rooted DAGs.
//!
//! The crate covers best-arm identification over the root's children,
//! best-leaf identification, the FUSE baseline for feature selection, the
//! reward oracles used by the experiments and the sample-complexity
//! quantities that bound them.

// `!(x > 0.0)` style checks are meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bai;
pub mod bli;
pub mod bounds;
pub mod dag;
pub mod oracle;
pub mod rave;
pub mod domain;
pub mod fuse;
pub mod state;
pub mod theory;

pub use bounds::{BetaKind, ExplorationFn};
pub use dag::{NodeId, SearchDag};
pub use domain::{DomainSpec, Move};
pub use state::{FeatureSet, StateKey};
