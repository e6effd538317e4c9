use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_action, Environment, StepResult};
use crate::error::Result;
use crate::predicates::{Feature, FeatureSchema};

/// Deterministic two-state, two-action MDP.
///
/// | state | action | reward | next |
/// |-------|--------|--------|------|
/// | 0     | 0      | 0.0    | 1    |
/// | 0     | 1      | 0.3    | 0    |
/// | 1     | 0      | 0.0    | 0    |
/// | 1     | 1      | 1.0    | 1    |
///
/// The myopic choice in state 0 (action 1) is not optimal for γ near 1.
/// The single observation is the Boolean "in state 1".
#[derive(Debug, Clone)]
pub struct TwoStateMdp {
    state: usize,
    steps: usize,
    max_steps: usize,
}

impl TwoStateMdp {
    pub const TABLE: [[(f64, usize); 2]; 2] = [[(0.0, 1), (0.3, 0)], [(0.0, 0), (1.0, 1)]];

    pub fn new(max_steps: usize) -> Self {
        Self {
            state: 0,
            steps: 0,
            max_steps: max_steps.max(1),
        }
    }

    pub fn observation(state: usize) -> Vec<f64> {
        vec![state as f64]
    }
}

impl Environment for TwoStateMdp {
    fn name(&self) -> &'static str {
        "two-state-mdp"
    }

    fn schema(&self) -> FeatureSchema {
        FeatureSchema::new(vec![Feature::discrete("InStateOne")]).expect("static schema")
    }

    fn action_names(&self) -> Vec<String> {
        vec!["switch".into(), "stay".into()]
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.state = rng.random_range(0..2);
        self.steps = 0;
        Self::observation(self.state)
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        check_action(action, 2)?;
        let (reward, next) = Self::TABLE[self.state][action];
        self.state = next;
        self.steps += 1;
        Ok(StepResult {
            state: Self::observation(next),
            reward,
            done: false,
            truncated: self.steps >= self.max_steps,
        })
    }
}

/// One-step, two-armed bandit with fixed rewards and a constant observation.
#[derive(Debug, Clone)]
pub struct Bandit {
    rewards: [f64; 2],
}

impl Bandit {
    pub fn new(rewards: [f64; 2]) -> Self {
        Self { rewards }
    }
}

impl Environment for Bandit {
    fn name(&self) -> &'static str {
        "bandit"
    }

    fn schema(&self) -> FeatureSchema {
        FeatureSchema::new(vec![Feature::continuous("Bias", -1.0, 1.0, 1)]).expect("static schema")
    }

    fn action_names(&self) -> Vec<String> {
        vec!["armA".into(), "armB".into()]
    }

    fn reset(&mut self, _seed: u64) -> Vec<f64> {
        vec![0.0]
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        check_action(action, 2)?;
        Ok(StepResult {
            state: vec![0.0],
            reward: self.rewards[action],
            done: true,
            truncated: false,
        })
    }
}
