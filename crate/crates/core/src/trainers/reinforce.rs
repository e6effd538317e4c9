//! Monte-Carlo policy gradient on the dNL actor.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{discounted_returns, mean_entropy, Trainer, Transition, UpdateMetrics, UpdateOutcome};
use crate::error::{check_finite, Error, Result};
use crate::optim::Adam;
use crate::policy::{sample_action, DnlPolicy, SampleMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReinforceConfig {
    pub gamma: f64,
    pub lr: f64,
    /// Standardise returns within each episode.
    pub normalize_returns: bool,
    pub entropy_coef: f64,
    pub max_grad_norm: Option<f64>,
}

impl Default for ReinforceConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lr: 1e-2,
            normalize_returns: false,
            entropy_coef: 0.0,
            max_grad_norm: None,
        }
    }
}

impl ReinforceConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut p = Vec::new();
        if !(0.0..=1.0).contains(&self.gamma) {
            p.push(format!("reinforce.gamma must be in [0, 1], got {}", self.gamma));
        }
        if !(self.lr > 0.0) {
            p.push(format!("reinforce.lr must be > 0, got {}", self.lr));
        }
        if !(self.entropy_coef >= 0.0) {
            p.push("reinforce.entropy_coef must be >= 0".into());
        }
        p
    }
}

/// Loss `−(1/T)·Σ_t G_t·log π(a_t|s_t)` and its gradient with respect to the
/// probability matrix (row-major, one row per step).
pub fn reinforce_gradient(probs: &[f64], actions: &[usize], returns: &[f64], n_actions: usize) -> (f64, Vec<f64>) {
    let t = actions.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; probs.len()];
    for (i, (&a, &g)) in actions.iter().zip(returns).enumerate() {
        let p = probs[i * n_actions + a].max(1e-300);
        loss -= g * p.ln() / t;
        grad[i * n_actions + a] = -g / (p * t);
    }
    (loss, grad)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReinforceTrainer {
    cfg: ReinforceConfig,
    policy: DnlPolicy,
    opt: Adam,
    episode: Vec<Transition>,
    #[serde(with = "super::rng_state")]
    rng: ChaCha8Rng,
}

impl ReinforceTrainer {
    pub fn new(policy: DnlPolicy, cfg: ReinforceConfig, seed: u64) -> Result<Self> {
        let problems = cfg.validate();
        if !problems.is_empty() {
            return Err(Error::InvalidConfig(problems));
        }
        Ok(Self {
            opt: Adam::new(policy.num_params(), cfg.lr).with_max_grad_norm(cfg.max_grad_norm),
            cfg,
            policy,
            episode: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn config(&self) -> &ReinforceConfig {
        &self.cfg
    }

    fn learn_episode(&mut self) -> Result<UpdateOutcome> {
        let episode = std::mem::take(&mut self.episode);
        let na = self.policy.n_actions();
        let rewards: Vec<f64> = episode.iter().map(|t| t.reward).collect();
        let mut returns = discounted_returns(&rewards, self.cfg.gamma, 0.0);
        if self.cfg.normalize_returns && returns.len() > 1 {
            let n = returns.len() as f64;
            let mean = returns.iter().sum::<f64>() / n;
            let std = (returns.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n).sqrt();
            for g in &mut returns {
                *g = (*g - mean) / (std + 1e-8);
            }
        }
        let actions: Vec<usize> = episode.iter().map(|t| t.action).collect();
        let raw: Vec<&[f64]> = episode.iter().map(|t| t.state.as_slice()).collect();
        let processed = self.policy.process_batch(&raw)?;
        let trace = self.policy.forward_trace(&processed)?;
        let probs = trace.output.all_probs();
        let (mut loss, mut d_probs) = reinforce_gradient(probs, &actions, &returns, na);
        let entropy = mean_entropy(probs, na);
        if self.cfg.entropy_coef > 0.0 {
            // maximise entropy: add −β·H, dH/dp = −(log p + 1)
            let scale = self.cfg.entropy_coef / actions.len() as f64;
            for (d, &p) in d_probs.iter_mut().zip(probs) {
                *d += scale * (p.max(1e-300).ln() + 1.0);
            }
            loss -= self.cfg.entropy_coef * entropy;
        }
        check_finite("reinforce loss", loss)?;
        let grad = self.policy.backward_probs(&trace, &d_probs);
        let mut params = self.policy.params();
        self.opt.step(&mut params, &grad)?;
        self.policy.set_params(&params)?;
        Ok(UpdateOutcome::Updated(UpdateMetrics {
            actor_loss: Some(loss),
            entropy: Some(entropy),
            ..Default::default()
        }))
    }
}

impl Trainer for ReinforceTrainer {
    fn act(&mut self, state: &[f64], mode: SampleMode) -> Result<usize> {
        let probs = self.policy.action_probs(state)?;
        Ok(sample_action(&probs, mode, &mut self.rng))
    }

    fn observe(&mut self, transition: Transition) -> Result<()> {
        self.episode.push(transition);
        Ok(())
    }

    fn update(&mut self) -> Result<UpdateOutcome> {
        match self.episode.last() {
            Some(t) if t.episode_over() => self.learn_episode(),
            _ => Ok(UpdateOutcome::Skipped("episode in progress".into())),
        }
    }

    fn policy(&self) -> Option<&DnlPolicy> {
        Some(&self.policy)
    }
}
