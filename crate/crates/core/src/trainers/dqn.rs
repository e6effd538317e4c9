//! Deep Q-learning with either an MLP or a scaled dNL value head.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{stack_states, ReplayBuffer, Trainer, Transition, UpdateMetrics, UpdateOutcome};
use crate::error::{check_finite, Error, Result};
use crate::nn::Mlp;
use crate::optim::Adam;
use crate::policy::{argmax, DnlPolicy, SampleMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QModelKind {
    Mlp,
    /// `Q(s, a) = q_scale · X_a(s)` using the dNL truth values.
    Dnl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnConfig {
    pub model: QModelKind,
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub warmup_steps: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: usize,
    pub target_update_every: usize,
    pub hidden: Vec<usize>,
    pub q_scale: f64,
    pub max_grad_norm: Option<f64>,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            model: QModelKind::Mlp,
            gamma: 0.99,
            lr: 1e-3,
            batch_size: 64,
            buffer_capacity: 50_000,
            warmup_steps: 1000,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 10_000,
            target_update_every: 500,
            hidden: vec![64, 64],
            q_scale: 100.0,
            max_grad_norm: Some(10.0),
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut p = Vec::new();
        if !(0.0..=1.0).contains(&self.gamma) {
            p.push(format!("dqn.gamma must be in [0, 1], got {}", self.gamma));
        }
        if !(self.lr > 0.0) {
            p.push(format!("dqn.lr must be > 0, got {}", self.lr));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            p.push("dqn.batch_size must be >= 1 and <= buffer_capacity".into());
        }
        for (name, v) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&v) {
                p.push(format!("dqn.{name} must be in [0, 1], got {v}"));
            }
        }
        if self.target_update_every == 0 {
            p.push("dqn.target_update_every must be >= 1".into());
        }
        if !(self.q_scale > 0.0) {
            p.push("dqn.q_scale must be > 0".into());
        }
        p
    }

    /// Linearly decayed exploration rate after `step` environment steps.
    pub fn epsilon(&self, step: u64) -> f64 {
        if self.epsilon_decay_steps == 0 {
            return self.epsilon_end;
        }
        let frac = (step as f64 / self.epsilon_decay_steps as f64).min(1.0);
        self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum QModel {
    Mlp(Mlp),
    Dnl { policy: DnlPolicy, scale: f64 },
}

impl QModel {
    /// Q-values, row-major `batch × n_actions`.
    pub fn q_values(&self, raw: &[&[f64]]) -> Result<Vec<f64>> {
        match self {
            QModel::Mlp(net) => {
                let x = stack_states(raw.iter().copied(), net.input_dim());
                Ok(net.forward(x.view())?.into_raw_vec_and_offset().0)
            }
            QModel::Dnl { policy, scale } => {
                let out = policy.forward_raw(raw)?;
                Ok(out.all_truths().iter().map(|t| t * scale).collect())
            }
        }
    }

    fn num_params(&self) -> usize {
        match self {
            QModel::Mlp(net) => net.num_params(),
            QModel::Dnl { policy, .. } => policy.num_params(),
        }
    }

    /// Loss and gradient of mean squared TD error on the taken actions.
    fn td_step(&self, raw: &[&[f64]], actions: &[usize], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
        let b = actions.len() as f64;
        match self {
            QModel::Mlp(net) => {
                let x = stack_states(raw.iter().copied(), net.input_dim());
                let (q, cache) = net.forward_cache(x.view())?;
                let mut d = Array2::<f64>::zeros(q.raw_dim());
                let mut loss = 0.0;
                for (i, (&a, &y)) in actions.iter().zip(targets).enumerate() {
                    let e = q[[i, a]] - y;
                    loss += e * e / b;
                    d[[i, a]] = 2.0 * e / b;
                }
                Ok((loss, net.backward(&cache, d.view())))
            }
            QModel::Dnl { policy, scale } => {
                let processed = policy.process_batch(raw)?;
                let trace = policy.forward_trace(&processed)?;
                let na = policy.n_actions();
                let mut d = vec![0.0; actions.len() * na];
                let mut loss = 0.0;
                for (i, (&a, &y)) in actions.iter().zip(targets).enumerate() {
                    let e = scale * trace.output.truths(i)[a] - y;
                    loss += e * e / b;
                    d[i * na + a] = 2.0 * e * scale / b;
                }
                Ok((loss, policy.backward_truths(&trace, &d)))
            }
        }
    }

    fn apply(&mut self, opt: &mut Adam, grad: &[f64]) -> Result<()> {
        match self {
            QModel::Mlp(net) => opt.step(net.params_mut(), grad),
            QModel::Dnl { policy, .. } => {
                let mut p = policy.params();
                opt.step(&mut p, grad)?;
                policy.set_params(&p)
            }
        }
    }

    fn copy_from(&mut self, other: &QModel) -> Result<()> {
        match (self, other) {
            (QModel::Mlp(a), QModel::Mlp(b)) => {
                a.soft_update_from(b, 1.0);
                Ok(())
            }
            (QModel::Dnl { policy, .. }, QModel::Dnl { policy: src, .. }) => policy.set_params(&src.params()),
            _ => Err(Error::Config("target and online Q-models differ in kind".into())),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DqnTrainer {
    cfg: DqnConfig,
    online: QModel,
    target: QModel,
    opt: Adam,
    replay: ReplayBuffer,
    #[serde(with = "super::rng_state")]
    rng: ChaCha8Rng,
    steps: u64,
    updates: u64,
}

impl DqnTrainer {
    /// The dNL policy seeds the value head when `cfg.model` is `Dnl`; with an
    /// MLP head it only supplies the observation and action sizes.
    pub fn new(policy: DnlPolicy, cfg: DqnConfig, seed: u64) -> Result<Self> {
        let problems = cfg.validate();
        if !problems.is_empty() {
            return Err(Error::InvalidConfig(problems));
        }
        let online = match cfg.model {
            QModelKind::Mlp => {
                let mut sizes = vec![policy.schema().len()];
                sizes.extend(&cfg.hidden);
                sizes.push(policy.n_actions());
                QModel::Mlp(Mlp::new(&sizes, seed ^ 0xd9a))
            }
            QModelKind::Dnl => QModel::Dnl {
                policy,
                scale: cfg.q_scale,
            },
        };
        let target = online.clone();
        Ok(Self {
            opt: Adam::new(online.num_params(), cfg.lr).with_max_grad_norm(cfg.max_grad_norm),
            online,
            target,
            replay: ReplayBuffer::new(cfg.buffer_capacity),
            rng: ChaCha8Rng::seed_from_u64(seed),
            cfg,
            steps: 0,
            updates: 0,
        })
    }

    pub fn model(&self) -> &QModel {
        &self.online
    }

    pub fn epsilon(&self) -> f64 {
        self.cfg.epsilon(self.steps)
    }

    fn learn(&mut self) -> Result<UpdateOutcome> {
        let b = self.cfg.batch_size;
        let idx = self.replay.sample_indices(b, &mut self.rng);
        let batch = self.replay.batch(&idx);
        let q_next = self.target.q_values(&batch.next_state_rows())?;
        let na = q_next.len() / b;
        let targets: Vec<f64> = (0..b)
            .map(|i| {
                if batch.dones[i] {
                    batch.rewards[i]
                } else {
                    let best = q_next[i * na..(i + 1) * na].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    batch.rewards[i] + self.cfg.gamma * best
                }
            })
            .collect();
        let raw = batch.state_rows();
        let actions = &batch.actions;
        let (loss, grad) = self.online.td_step(&raw, &actions, &targets)?;
        check_finite("td loss", loss)?;
        self.online.apply(&mut self.opt, &grad)?;
        self.updates += 1;
        if self.updates % self.cfg.target_update_every as u64 == 0 {
            self.target.copy_from(&self.online)?;
        }
        Ok(UpdateOutcome::Updated(UpdateMetrics {
            critic_loss: Some(loss),
            ..Default::default()
        }))
    }
}

impl Trainer for DqnTrainer {
    fn act(&mut self, state: &[f64], mode: SampleMode) -> Result<usize> {
        let q = self.online.q_values(&[state])?;
        if mode == SampleMode::Stochastic && self.rng.random::<f64>() < self.epsilon() {
            return Ok(self.rng.random_range(0..q.len()));
        }
        Ok(argmax(&q))
    }

    fn observe(&mut self, transition: Transition) -> Result<()> {
        self.replay.push(transition)?;
        self.steps += 1;
        Ok(())
    }

    fn update(&mut self) -> Result<UpdateOutcome> {
        if self.steps < self.cfg.warmup_steps as u64 || self.replay.len() < self.cfg.batch_size {
            return Ok(UpdateOutcome::Skipped("warm-up".into()));
        }
        self.learn()
    }

    fn policy(&self) -> Option<&DnlPolicy> {
        match &self.online {
            QModel::Dnl { policy, .. } => Some(policy),
            QModel::Mlp(_) => None,
        }
    }
}
