//! Sparse, interpretable rule learning through weighted-partial MaxSAT.
//!
//! The crate learns CNF and DNF classifiers, decision lists and decision sets
//! from tabular data. Training a rule is reduced to a weighted-partial MaxSAT
//! query over "feature appears in clause" and "sample is misclassified"
//! variables; large inputs are handled by solving a sequence of small queries
//! (mini-batches biased towards the previous rule) and by learning one clause
//! at a time on the samples that remain uncovered.
//!
//! Module map:
//!
//! - [`data`]: CSV ingestion, discretization, one-hot encoding, negation
//!   augmentation, feature ranking and batching.
//! - [`formula`]: rule representations, evaluation, pruning, rendering and the
//!   model file format.
//! - [`wcnf`]: weighted-partial CNF formulas and the WDIMACS exchange format.
//! - [`encoder`]: builds the MaxSAT query for a batch and decodes assignments.
//! - [`solver`]: exhaustive, branch-and-bound and external MaxSAT backends.
//! - [`learner`]: mini-batch, iterative, DNF, decision-list and decision-set
//!   training.
//! - [`eval`]: accuracy, stratified k-fold cross-validation and grids.
//! - [`cli`]: the command-line front end.

pub mod cli;
pub mod data;
pub mod encoder;
mod error;
pub mod eval;
pub mod formula;
pub mod learner;
pub mod solver;
pub mod wcnf;

pub use error::{Error, Result};
