//! Bayesian active learning of causal probability trees.
//!
//! Competing causal hypotheses are subtrees of one meta tree over a hypothesis
//! variable. [`inference`] computes exact posteriors from mixed observational
//! and interventional data, [`gain`] scores candidate interventions, and
//! [`simharness`] runs seeded active-learning episodes against a known truth.

pub mod error;
pub mod formats;
pub mod gain;
pub mod hypotheses;
pub mod inference;
pub mod numeric;
pub mod pairsdata;
pub mod ptree;
pub mod simharness;
pub mod strategies;

pub use error::{Error, Result};
pub use gain::{EvidenceNats, GainOptions, GainScore};
pub use hypotheses::{CausalOrder, ContextSwapSpec, HypothesisSet, HypothesisSpec, PriorTable};
pub use inference::{BeliefState, CountTable, Dataset, Posterior, Record};
pub use ptree::{Assignment, Intervention, NodeSpec, PTree, Statement, VariableSpace};
pub use strategies::StrategyKind;
