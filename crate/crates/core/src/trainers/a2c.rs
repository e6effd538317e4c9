//! Synchronous advantage actor-critic: dNL actor, MLP state-value critic,
//! n-step bootstrapped returns.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{discounted_returns, mean_entropy, reinforce::reinforce_gradient, stack_states};
use super::{Trainer, Transition, UpdateMetrics, UpdateOutcome};
use crate::error::{check_finite, Error, Result};
use crate::nn::Mlp;
use crate::optim::Adam;
use crate::policy::{sample_action, DnlPolicy, SampleMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct A2cConfig {
    pub gamma: f64,
    pub n_steps: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub entropy_coef: f64,
    pub hidden: Vec<usize>,
    pub max_grad_norm: Option<f64>,
}

impl Default for A2cConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            n_steps: 16,
            actor_lr: 3e-3,
            critic_lr: 1e-3,
            entropy_coef: 0.01,
            hidden: vec![64, 64],
            max_grad_norm: Some(5.0),
        }
    }
}

impl A2cConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut p = Vec::new();
        if !(0.0..=1.0).contains(&self.gamma) {
            p.push(format!("a2c.gamma must be in [0, 1], got {}", self.gamma));
        }
        if self.n_steps == 0 {
            p.push("a2c.n_steps must be >= 1".into());
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            p.push("a2c learning rates must be positive".into());
        }
        if !(self.entropy_coef >= 0.0) {
            p.push("a2c.entropy_coef must be >= 0".into());
        }
        p
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct A2cTrainer {
    cfg: A2cConfig,
    policy: DnlPolicy,
    critic: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    rollout: Vec<Transition>,
    #[serde(with = "super::rng_state")]
    rng: ChaCha8Rng,
}

impl A2cTrainer {
    pub fn new(policy: DnlPolicy, cfg: A2cConfig, seed: u64) -> Result<Self> {
        let problems = cfg.validate();
        if !problems.is_empty() {
            return Err(Error::InvalidConfig(problems));
        }
        let mut sizes = vec![policy.schema().len()];
        sizes.extend(&cfg.hidden);
        sizes.push(1);
        let critic = Mlp::new(&sizes, seed ^ 0xa2c);
        Ok(Self {
            actor_opt: Adam::new(policy.num_params(), cfg.actor_lr).with_max_grad_norm(cfg.max_grad_norm),
            critic_opt: Adam::new(critic.num_params(), cfg.critic_lr).with_max_grad_norm(cfg.max_grad_norm),
            critic,
            cfg,
            policy,
            rollout: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    fn learn_rollout(&mut self) -> Result<UpdateOutcome> {
        let rollout = std::mem::take(&mut self.rollout);
        let dim = self.policy.schema().len();
        let na = self.policy.n_actions();
        let n = rollout.len();
        let last = rollout.last().expect("non-empty rollout");
        let bootstrap = if last.done {
            0.0
        } else {
            let x = stack_states(std::iter::once(last.next_state.as_slice()), dim);
            self.critic.forward(x.view())?[[0, 0]]
        };
        let rewards: Vec<f64> = rollout.iter().map(|t| t.reward).collect();
        let returns = discounted_returns(&rewards, self.cfg.gamma, bootstrap);

        let states = stack_states(rollout.iter().map(|t| t.state.as_slice()), dim);
        let (v, cache) = self.critic.forward_cache(states.view())?;
        let mut d_v = Array2::<f64>::zeros((n, 1));
        let mut critic_loss = 0.0;
        let mut adv = vec![0.0; n];
        for i in 0..n {
            let e = v[[i, 0]] - returns[i];
            adv[i] = -e;
            critic_loss += e * e / n as f64;
            d_v[[i, 0]] = 2.0 * e / n as f64;
        }
        check_finite("value loss", critic_loss)?;
        let g = self.critic.backward(&cache, d_v.view());
        self.critic_opt.step(self.critic.params_mut(), &g)?;

        let actions: Vec<usize> = rollout.iter().map(|t| t.action).collect();
        let raw: Vec<&[f64]> = rollout.iter().map(|t| t.state.as_slice()).collect();
        let processed = self.policy.process_batch(&raw)?;
        let trace = self.policy.forward_trace(&processed)?;
        let probs = trace.output.all_probs();
        let (mut actor_loss, mut d_probs) = reinforce_gradient(probs, &actions, &adv, na);
        let entropy = mean_entropy(probs, na);
        if self.cfg.entropy_coef > 0.0 {
            let scale = self.cfg.entropy_coef / n as f64;
            for (d, &p) in d_probs.iter_mut().zip(probs) {
                *d += scale * (p.max(1e-300).ln() + 1.0);
            }
            actor_loss -= self.cfg.entropy_coef * entropy;
        }
        check_finite("actor loss", actor_loss)?;
        let grad = self.policy.backward_probs(&trace, &d_probs);
        let mut params = self.policy.params();
        self.actor_opt.step(&mut params, &grad)?;
        self.policy.set_params(&params)?;
        Ok(UpdateOutcome::Updated(UpdateMetrics {
            critic_loss: Some(critic_loss),
            actor_loss: Some(actor_loss),
            entropy: Some(entropy),
            alpha: None,
        }))
    }
}

impl Trainer for A2cTrainer {
    fn act(&mut self, state: &[f64], mode: SampleMode) -> Result<usize> {
        let probs = self.policy.action_probs(state)?;
        Ok(sample_action(&probs, mode, &mut self.rng))
    }

    fn observe(&mut self, transition: Transition) -> Result<()> {
        self.rollout.push(transition);
        Ok(())
    }

    fn update(&mut self) -> Result<UpdateOutcome> {
        match self.rollout.last() {
            Some(t) if t.episode_over() || self.rollout.len() >= self.cfg.n_steps => self.learn_rollout(),
            _ => Ok(UpdateOutcome::Skipped("rollout in progress".into())),
        }
    }

    fn policy(&self) -> Option<&DnlPolicy> {
        Some(&self.policy)
    }
}
