//! Interpretable reinforcement learning with differentiable neural-logic
//! policies over trainable boundary predicates.
//!
//! A [`policy::DnlPolicy`] maps observations to action probabilities through
//! fuzzy conjunctions and disjunctions of threshold predicates. Trainers in
//! [`trainers`] fit it to an [`envs::Environment`]; [`rules`] reads the
//! learned program back out as first-order clauses.

pub mod envs;
pub mod error;
pub mod experiment;
pub mod logic;
pub mod nn;
pub mod optim;
pub mod policy;
pub mod predicates;
pub mod rules;
pub mod trainers;

pub use error::{Error, Result};
