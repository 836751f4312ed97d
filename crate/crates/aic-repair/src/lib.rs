//! Active integrity constraints over an embedded relational store.
//!
//! An active integrity constraint pairs a violation condition (a conjunction
//! of literals) with the corrective update actions permitted to resolve it.
//! This crate checks a database against a constraint set and computes the
//! four repair kinds from the literature — simple, founded, well-founded and
//! justified — by breadth-first repair-tree search, with graph-based
//! partitioning and stratification so independent constraint groups can be
//! searched in parallel.
//!
//! Layout:
//! - [`model`]: atoms, literals, update actions, constraints, update sets.
//! - [`parser`]: the constraint text format and its annotated variant.
//! - [`datastore`]: the embedded store (violation queries, update/undo,
//!   JSON persistence, SQL text emission).
//! - [`repair`]: the four repair trees, leaf validation, minimality pruning.
//! - [`partition`]: independence/precedence graphs and stratification.
//! - [`engine`]: sequential or parallel execution over a whole document.
//! - [`oracle`]: exponential brute-force reference for cross-checking.
//! - [`cli`]: the command-line front end.

pub mod cli;
pub mod datastore;
pub mod engine;
pub mod model;
pub mod oracle;
pub mod parser;
pub mod partition;
pub mod repair;

pub use datastore::Database;
pub use model::{Aic, AtomPattern, Literal, Term, UpdateAction, UpdateSet};
pub use parser::AicDocument;
pub use repair::{RepairKind, RepairOutcome};
