//! Reproducible experiment harness: configuration, training loop, artifacts.

pub mod checkpoint;
pub mod config;
pub mod plots;
pub mod run;

pub use checkpoint::Checkpoint;
pub use config::{ExperimentConfig, RuleConfig, TransformEntry, Variant};
pub use run::{run_experiment, run_trial, EpisodeRecord, RunRecord, Session};
