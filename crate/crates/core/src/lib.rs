//! Suggests provider-library signal names for free-form customer signal names.
//!
//! The crate is organised as a pipeline:
//!
//! * [`data`] loads, splits and synthesises datasets of (customer, library) pairs.
//! * [`preprocess`] lowercases, cleans and tokenizes signal names.
//! * [`classifiers`] holds the lookup-table and naive Bayes baselines plus the
//!   token-vote model, where every token of a customer name votes for the
//!   library names it co-occurred with in training.
//! * [`rerank`] reorders suggestion lists with antonym penalties and keyword rewards.
//! * [`evaluate`] computes accuracy / top-k / weighted metrics, learning curves
//!   and runtime benchmarks.

pub mod classifiers;
pub mod data;
mod error;
pub mod evaluate;
pub mod preprocess;
pub mod rerank;

pub use classifiers::{Method, Model, Prediction, RankedPredictions};
pub use data::{Dataset, SignalLibrary, SignalPair, SynthConfig, SyntheticCorpus};
pub use error::{Error, Result};
pub use rerank::{AntonymTable, KeywordSet};
