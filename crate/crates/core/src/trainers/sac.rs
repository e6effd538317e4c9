//! Discrete-action Soft Actor-Critic with a dNL actor and twin MLP critics.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{mean_entropy, ReplayBuffer, Trainer, Transition, UpdateMetrics, UpdateOutcome};
use crate::error::{check_finite, Error, Result};
use crate::nn::Mlp;
use crate::optim::Adam;
use crate::policy::{sample_action, DnlPolicy, SampleMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SacConfig {
    pub gamma: f64,
    /// Entropy temperature (initial value when `auto_alpha` is set).
    pub alpha: f64,
    pub auto_alpha: bool,
    /// Target entropy as a fraction of `log |A|` for temperature tuning.
    pub target_entropy_ratio: f64,
    pub alpha_lr: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub buffer_capacity: usize,
    /// Environment steps collected before the first update.
    pub warmup_steps: usize,
    pub update_every: usize,
    pub target_update_every: usize,
    pub hidden: Vec<usize>,
    pub max_grad_norm: Option<f64>,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            alpha: 0.2,
            auto_alpha: false,
            target_entropy_ratio: 0.98,
            alpha_lr: 3e-4,
            tau: 0.005,
            batch_size: 64,
            actor_lr: 1e-3,
            critic_lr: 3e-4,
            buffer_capacity: 100_000,
            warmup_steps: 1000,
            update_every: 1,
            target_update_every: 1,
            hidden: vec![64, 64],
            max_grad_norm: None,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut p = Vec::new();
        if !(0.0..=1.0).contains(&self.gamma) {
            p.push(format!("sac.gamma must be in [0, 1], got {}", self.gamma));
        }
        if !(self.alpha > 0.0) && !(self.alpha == 0.0 && !self.auto_alpha) {
            p.push(format!("sac.alpha must be > 0, got {}", self.alpha));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            p.push(format!("sac.tau must be in (0, 1], got {}", self.tau));
        }
        if self.batch_size == 0 {
            p.push("sac.batch_size must be >= 1".into());
        }
        if self.buffer_capacity < self.batch_size {
            p.push("sac.buffer_capacity must be >= batch_size".into());
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0 && self.alpha_lr > 0.0) {
            p.push("sac learning rates must be positive".into());
        }
        if self.update_every == 0 || self.target_update_every == 0 {
            p.push("sac update intervals must be >= 1".into());
        }
        if !(self.target_entropy_ratio > 0.0 && self.target_entropy_ratio <= 1.0) {
            p.push("sac.target_entropy_ratio must be in (0, 1]".into());
        }
        if self.hidden.iter().any(|&h| h == 0) {
            p.push("sac.hidden widths must be >= 1".into());
        }
        p
    }
}

#[inline]
fn safe_ln(p: f64) -> f64 {
    p.max(1e-300).ln()
}

/// Soft Bellman targets
/// `y = r + γ·(1 − done)·Σₐ π(a|s′)·(min(Q̄₁, Q̄₂)(s′, a) − α·log π(a|s′))`.
#[allow(clippy::too_many_arguments)]
pub fn critic_targets(
    rewards: &[f64],
    dones: &[bool],
    next_probs: &[f64],
    next_q1: &[f64],
    next_q2: &[f64],
    n_actions: usize,
    alpha: f64,
    gamma: f64,
) -> Vec<f64> {
    rewards
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            if dones[i] {
                return r;
            }
            let row = i * n_actions..(i + 1) * n_actions;
            let soft_v: f64 = next_probs[row.clone()]
                .iter()
                .zip(&next_q1[row.clone()])
                .zip(&next_q2[row])
                .map(|((&p, &q1), &q2)| {
                    if p > 0.0 {
                        p * (q1.min(q2) - alpha * p.ln())
                    } else {
                        0.0
                    }
                })
                .sum();
            r + gamma * soft_v
        })
        .collect()
}

/// Batch-mean actor cost `Σₐ π(a|s)·(α·log π(a|s) − min(Q₁, Q₂)(s, a))` and
/// its gradient with respect to each probability.
pub fn actor_loss(probs: &[f64], q1: &[f64], q2: &[f64], n_actions: usize, alpha: f64) -> (f64, Vec<f64>) {
    let rows = probs.len() / n_actions;
    let scale = 1.0 / rows as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; probs.len()];
    for i in 0..probs.len() {
        let q = q1[i].min(q2[i]);
        let p = probs[i];
        let lp = safe_ln(p);
        if p > 0.0 {
            loss += p * (alpha * lp - q);
        }
        grad[i] = scale * (alpha * (lp + 1.0) - q);
    }
    (loss * scale, grad)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SacTrainer {
    cfg: SacConfig,
    policy: DnlPolicy,
    critics: [Mlp; 2],
    targets: [Mlp; 2],
    actor_opt: Adam,
    critic_opts: [Adam; 2],
    log_alpha: f64,
    alpha_opt: Adam,
    replay: ReplayBuffer,
    #[serde(with = "super::rng_state")]
    rng: ChaCha8Rng,
    steps: u64,
    updates: u64,
}

impl SacTrainer {
    pub fn new(policy: DnlPolicy, cfg: SacConfig, seed: u64) -> Result<Self> {
        let problems = cfg.validate();
        if !problems.is_empty() {
            return Err(Error::InvalidConfig(problems));
        }
        let obs_dim = policy.schema().len();
        let n_actions = policy.n_actions();
        let mut sizes = vec![obs_dim];
        sizes.extend(&cfg.hidden);
        sizes.push(n_actions);
        let critics = [Mlp::new(&sizes, seed ^ 0x5ac1), Mlp::new(&sizes, seed ^ 0x5ac2)];
        let targets = critics.clone();
        let actor_opt = Adam::new(policy.num_params(), cfg.actor_lr).with_max_grad_norm(cfg.max_grad_norm);
        let critic_opts = [
            Adam::new(critics[0].num_params(), cfg.critic_lr).with_max_grad_norm(cfg.max_grad_norm),
            Adam::new(critics[1].num_params(), cfg.critic_lr).with_max_grad_norm(cfg.max_grad_norm),
        ];
        Ok(Self {
            log_alpha: cfg.alpha.max(1e-12).ln(),
            alpha_opt: Adam::new(1, cfg.alpha_lr),
            replay: ReplayBuffer::new(cfg.buffer_capacity),
            rng: ChaCha8Rng::seed_from_u64(seed),
            cfg,
            policy,
            critics,
            targets,
            actor_opt,
            critic_opts,
            steps: 0,
            updates: 0,
        })
    }

    pub fn config(&self) -> &SacConfig {
        &self.cfg
    }

    pub fn alpha(&self) -> f64 {
        if self.cfg.auto_alpha {
            self.log_alpha.exp()
        } else {
            self.cfg.alpha
        }
    }

    pub fn critics(&self) -> &[Mlp; 2] {
        &self.critics
    }

    pub fn targets(&self) -> &[Mlp; 2] {
        &self.targets
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn policy_mut(&mut self) -> &mut DnlPolicy {
        &mut self.policy
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// `θ̄ ← τ·θ + (1 − τ)·θ̄` for both critics.
    pub fn soft_update_targets(&mut self, tau: f64) {
        for (t, c) in self.targets.iter_mut().zip(&self.critics) {
            t.soft_update_from(c, tau);
        }
    }

    /// One critic step, one actor step, and (when due) a target update.
    pub fn sac_update(&mut self) -> Result<UpdateOutcome> {
        let b = self.cfg.batch_size;
        if self.replay.len() < b {
            return Ok(UpdateOutcome::Skipped(format!(
                "replay buffer holds {} transitions, batch needs {b}",
                self.replay.len()
            )));
        }
        let na = self.policy.n_actions();
        let alpha = self.alpha();
        let idx = self.replay.sample_indices(b, &mut self.rng);
        let batch = self.replay.batch(&idx);
        let (states, next_states) = (&batch.states, &batch.next_states);
        let (rewards, dones, actions) = (&batch.rewards, &batch.dones, &batch.actions);

        // soft targets
        let next_policy = self.policy.forward_raw(&batch.next_state_rows())?;
        let tq1 = self.targets[0].forward(next_states.view())?;
        let tq2 = self.targets[1].forward(next_states.view())?;
        let y = critic_targets(
            rewards,
            dones,
            next_policy.all_probs(),
            tq1.as_slice().expect("contiguous"),
            tq2.as_slice().expect("contiguous"),
            na,
            alpha,
            self.cfg.gamma,
        );

        // critics: mean squared error on the taken action
        let mut critic_loss = 0.0;
        for k in 0..2 {
            let (q, cache) = self.critics[k].forward_cache(states.view())?;
            let mut d_out = Array2::<f64>::zeros((b, na));
            let mut loss = 0.0;
            for i in 0..b {
                let err = q[[i, actions[i]]] - y[i];
                loss += err * err;
                d_out[[i, actions[i]]] = 2.0 * err / b as f64;
            }
            loss /= b as f64;
            check_finite("critic loss", loss)?;
            critic_loss += 0.5 * loss;
            let grad = self.critics[k].backward(&cache, d_out.view());
            self.critic_opts[k].step(self.critics[k].params_mut(), &grad)?;
        }

        // actor
        let processed = self.policy.process_batch(&batch.state_rows())?;
        let trace = self.policy.forward_trace(&processed)?;
        let q1 = self.critics[0].forward(states.view())?;
        let q2 = self.critics[1].forward(states.view())?;
        let probs = trace.output.all_probs();
        let (actor_loss, d_probs) = actor_loss(
            probs,
            q1.as_slice().expect("contiguous"),
            q2.as_slice().expect("contiguous"),
            na,
            alpha,
        );
        check_finite("actor loss", actor_loss)?;
        let grad = self.policy.backward_probs(&trace, &d_probs);
        let mut params = self.policy.params();
        self.actor_opt.step(&mut params, &grad)?;
        self.policy.set_params(&params)?;
        if !self.policy.bank().all_finite() {
            return Err(Error::Numeric("predicate bounds became non-finite".into()));
        }

        let entropy = mean_entropy(probs, na);
        if self.cfg.auto_alpha {
            let target = self.cfg.target_entropy_ratio * (na as f64).ln();
            // ∂/∂log α of E[−α·(log π + target)] = entropy − target
            let mut la = [self.log_alpha];
            self.alpha_opt.step(&mut la, &[entropy - target])?;
            self.log_alpha = la[0];
        }

        self.updates += 1;
        if self.updates % self.cfg.target_update_every as u64 == 0 {
            self.soft_update_targets(self.cfg.tau);
        }
        Ok(UpdateOutcome::Updated(UpdateMetrics {
            critic_loss: Some(critic_loss),
            actor_loss: Some(actor_loss),
            entropy: Some(entropy),
            alpha: Some(alpha),
        }))
    }
}

impl Trainer for SacTrainer {
    fn act(&mut self, state: &[f64], mode: SampleMode) -> Result<usize> {
        let probs = self.policy.action_probs(state)?;
        Ok(sample_action(&probs, mode, &mut self.rng))
    }

    fn observe(&mut self, transition: Transition) -> Result<()> {
        self.replay.push(transition)?;
        self.steps += 1;
        Ok(())
    }

    fn update(&mut self) -> Result<UpdateOutcome> {
        if self.steps < self.cfg.warmup_steps as u64 {
            return Ok(UpdateOutcome::Skipped("warm-up".into()));
        }
        if self.steps % self.cfg.update_every as u64 != 0 {
            return Ok(UpdateOutcome::Skipped("update not due".into()));
        }
        self.sac_update()
    }

    fn policy(&self) -> Option<&DnlPolicy> {
        Some(&self.policy)
    }
}
