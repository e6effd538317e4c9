//! Learning algorithms sharing one act / observe / update interface.

pub mod a2c;
pub mod dqn;
pub mod reinforce;
pub mod replay;
mod rng_state;
pub mod sac;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::policy::{DnlPolicy, SampleMode};

pub use a2c::{A2cConfig, A2cTrainer};
pub use dqn::{DqnConfig, DqnTrainer, QModel};
pub use reinforce::{ReinforceConfig, ReinforceTrainer};
pub use replay::{ReplayBatch, ReplayBuffer, TransitionRef};
pub use sac::{SacConfig, SacTrainer};

/// One environment transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Terminal: the value of `next_state` is zero.
    pub done: bool,
    /// Step-limit cut; the episode ends but `next_state` still bootstraps.
    #[serde(default)]
    pub truncated: bool,
}

impl Transition {
    pub fn episode_over(&self) -> bool {
        self.done || self.truncated
    }
}

/// Losses and diagnostics from one gradient update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateMetrics {
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    /// Mean policy entropy over the update batch.
    pub entropy: Option<f64>,
    pub alpha: Option<f64>,
}

/// Result of asking a trainer to update.
#[derive(Debug, Clone, PartialEq)]
pub enum UpdateOutcome {
    Updated(UpdateMetrics),
    /// Nothing to learn from yet (e.g. the replay buffer is below batch size).
    Skipped(String),
}

impl UpdateOutcome {
    pub fn metrics(&self) -> Option<UpdateMetrics> {
        match self {
            UpdateOutcome::Updated(m) => Some(*m),
            UpdateOutcome::Skipped(_) => None,
        }
    }
}

/// Common interface so the experiment harness can swap algorithms by configuration.
pub trait Trainer {
    fn act(&mut self, state: &[f64], mode: SampleMode) -> Result<usize>;

    /// Records a transition produced by the last action.
    fn observe(&mut self, transition: Transition) -> Result<()>;

    /// Performs whatever learning is due after the last observation.
    fn update(&mut self) -> Result<UpdateOutcome>;

    /// The interpretable actor, if this trainer has one.
    fn policy(&self) -> Option<&DnlPolicy>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainerKind {
    Sac,
    Reinforce,
    Dqn,
    A2c,
}

impl std::fmt::Display for TrainerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TrainerKind::Sac => "sac",
            TrainerKind::Reinforce => "reinforce",
            TrainerKind::Dqn => "dqn",
            TrainerKind::A2c => "a2c",
        })
    }
}

/// Any trainer, dispatched at run time and serialisable as a whole.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Agent {
    Sac(SacTrainer),
    Reinforce(ReinforceTrainer),
    Dqn(DqnTrainer),
    A2c(A2cTrainer),
}

impl Agent {
    pub fn kind(&self) -> TrainerKind {
        match self {
            Agent::Sac(_) => TrainerKind::Sac,
            Agent::Reinforce(_) => TrainerKind::Reinforce,
            Agent::Dqn(_) => TrainerKind::Dqn,
            Agent::A2c(_) => TrainerKind::A2c,
        }
    }

    fn inner(&mut self) -> &mut dyn Trainer {
        match self {
            Agent::Sac(t) => t,
            Agent::Reinforce(t) => t,
            Agent::Dqn(t) => t,
            Agent::A2c(t) => t,
        }
    }
}

impl Trainer for Agent {
    fn act(&mut self, state: &[f64], mode: SampleMode) -> Result<usize> {
        self.inner().act(state, mode)
    }

    fn observe(&mut self, transition: Transition) -> Result<()> {
        self.inner().observe(transition)
    }

    fn update(&mut self) -> Result<UpdateOutcome> {
        self.inner().update()
    }

    fn policy(&self) -> Option<&DnlPolicy> {
        match self {
            Agent::Sac(t) => t.policy(),
            Agent::Reinforce(t) => t.policy(),
            Agent::Dqn(t) => t.policy(),
            Agent::A2c(t) => t.policy(),
        }
    }
}

/// Stacks observations into a `batch × dim` matrix.
pub(crate) fn stack_states<'a>(states: impl ExactSizeIterator<Item = &'a [f64]>, dim: usize) -> Array2<f64> {
    let n = states.len();
    let mut flat = Vec::with_capacity(n * dim);
    for s in states {
        flat.extend_from_slice(s);
    }
    Array2::from_shape_vec((n, dim), flat).expect("state dimension")
}

/// Mean entropy `−Σ π log π` over rows of a row-major probability matrix.
pub fn mean_entropy(probs: &[f64], n_actions: usize) -> f64 {
    let rows = probs.len() / n_actions;
    let total: f64 = probs
        .chunks(n_actions)
        .map(|p| -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>())
        .sum();
    total / rows as f64
}

/// Discounted return-to-go `G_t = Σ_k γ^k r_{t+k}`.
pub fn discounted_returns(rewards: &[f64], gamma: f64, bootstrap: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = bootstrap;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}
