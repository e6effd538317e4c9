//! Episodic control environments.
//!
//! Observations are flat `f64` vectors aligned with the environment's
//! [`FeatureSchema`]; Boolean features are encoded as `0.0` / `1.0`.

mod cartpole;
mod lander;
mod toy;

pub use cartpole::{CartPole, CartPoleParams, CartPoleState};
pub use lander::{LunarLander, LanderParams, LanderState};
pub use toy::{Bandit, TwoStateMdp};

use crate::error::{Error, Result};
use crate::predicates::FeatureSchema;

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: Vec<f64>,
    pub reward: f64,
    /// Reached a terminal state; bootstrapping stops here.
    pub done: bool,
    /// Hit the step limit; not a terminal state.
    pub truncated: bool,
}

impl StepResult {
    pub fn episode_over(&self) -> bool {
        self.done || self.truncated
    }
}

pub trait Environment: Send {
    fn name(&self) -> &'static str;

    /// Features with the default binning ranges for this environment.
    fn schema(&self) -> FeatureSchema;

    fn action_names(&self) -> Vec<String>;

    fn n_actions(&self) -> usize {
        self.action_names().len()
    }

    fn observation_dim(&self) -> usize {
        self.schema().len()
    }

    /// Starts a new episode; the initial state depends only on `seed`.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    fn step(&mut self, action: usize) -> Result<StepResult>;
}

pub(crate) fn check_action(action: usize, n_actions: usize) -> Result<()> {
    if action < n_actions {
        Ok(())
    } else {
        Err(Error::InvalidAction { action, n_actions })
    }
}

/// Names accepted by [`make_env`].
pub const ENVIRONMENTS: &[&str] = &["cartpole", "lunarlander", "two-state-mdp", "bandit"];

/// Builds an environment by name. `max_steps` overrides the episode cap.
pub fn make_env(name: &str, max_steps: Option<usize>) -> Result<Box<dyn Environment>> {
    Ok(match name.to_ascii_lowercase().as_str() {
        "cartpole" => {
            let mut p = CartPoleParams::default();
            if let Some(m) = max_steps {
                p.max_steps = m;
            }
            Box::new(CartPole::new(p))
        }
        "lunarlander" | "lander" => {
            let mut p = LanderParams::default();
            if let Some(m) = max_steps {
                p.max_steps = m;
            }
            Box::new(LunarLander::new(p))
        }
        "two-state-mdp" | "toy" => Box::new(TwoStateMdp::new(max_steps.unwrap_or(20))),
        "bandit" => Box::new(Bandit::new([1.0, 0.0])),
        other => {
            return Err(Error::Config(format!(
                "unknown environment '{other}' (expected one of {})",
                ENVIRONMENTS.join(", ")
            )))
        }
    })
}
