//! The predicate action policy: one dNL network per action over a shared
//! predicate bank, normalised into an action distribution.

use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::logic::{DnlNetwork, NetworkEval, WeightInit, DEFAULT_MEMBERSHIP_C};
use crate::predicates::{
    build_input_matrix, column_labels, BlockSource, ColumnLabel, FeatureSchema, InputMatrix, PredicateBank,
    TransformKb, DEFAULT_BOUNDARY_C,
};

/// Per-action additive floor applied before normalising truth values.
pub const DEFAULT_PROB_FLOOR: f64 = 1e-6;

/// A state after knowledge-base preprocessing.
///
/// `continuous` is aligned with the predicate bank's blocks (raw continuous
/// features in schema order, then transformed values); `discrete` with the
/// schema's discrete features.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedState {
    pub continuous: Vec<f64>,
    pub discrete: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    /// Conjunction neurons (candidate rules) per action.
    pub n_terms: usize,
    pub membership_c: f64,
    pub boundary_c: f64,
    pub init: WeightInit,
    pub prob_floor: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            n_terms: 4,
            membership_c: DEFAULT_MEMBERSHIP_C,
            boundary_c: DEFAULT_BOUNDARY_C,
            init: WeightInit::default(),
            prob_floor: DEFAULT_PROB_FLOOR,
        }
    }
}

/// Evaluated per-action truth values and the derived distribution for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct PredicateActionPolicy {
    n_actions: usize,
    truths: Vec<f64>,
    probs: Vec<f64>,
}

impl PredicateActionPolicy {
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn batch_size(&self) -> usize {
        self.truths.len() / self.n_actions
    }

    pub fn truths(&self, row: usize) -> &[f64] {
        &self.truths[row * self.n_actions..(row + 1) * self.n_actions]
    }

    pub fn probs(&self, row: usize) -> &[f64] {
        &self.probs[row * self.n_actions..(row + 1) * self.n_actions]
    }

    pub fn all_probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn all_truths(&self) -> &[f64] {
        &self.truths
    }
}

/// `(Xₐ + ε) / Σ_b (X_b + ε)`.
pub fn normalize_truths(truths: &[f64], floor: f64) -> Vec<f64> {
    let total: f64 = truths.iter().map(|x| x + floor).sum();
    truths.iter().map(|x| (x + floor) / total).collect()
}

/// Chain rule through [`normalize_truths`]: `∂L/∂X_b = (g_b − Σₐ gₐπₐ) / S`.
pub fn normalize_backward(truths: &[f64], probs: &[f64], grad_probs: &[f64], floor: f64, out: &mut [f64]) {
    let total: f64 = truths.iter().map(|x| x + floor).sum();
    let dot: f64 = grad_probs.iter().zip(probs).map(|(g, p)| g * p).sum();
    for (o, g) in out.iter_mut().zip(grad_probs) {
        *o = (g - dot) / total;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    Stochastic,
    Greedy,
}

/// Argmax with lowest-index tie-break.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn sample_action(probs: &[f64], mode: SampleMode, rng: &mut impl Rng) -> usize {
    match mode {
        SampleMode::Greedy => argmax(probs),
        SampleMode::Stochastic => {
            let total: f64 = probs.iter().sum();
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            for (i, &p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return i;
                }
            }
            // rounding fallback: last action with non-zero mass
            probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
        }
    }
}

/// Everything from a forward pass needed to backpropagate.
#[derive(Debug, Clone)]
pub struct PolicyTrace {
    pub input: InputMatrix,
    pub output: PredicateActionPolicy,
    evals: Vec<NetworkEval>,
    terms: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DnlPolicy {
    schema: FeatureSchema,
    kb: TransformKb,
    actions: Vec<String>,
    bank: PredicateBank,
    networks: Vec<DnlNetwork>,
    prob_floor: f64,
    #[serde(skip)]
    labels: OnceLock<Arc<[ColumnLabel]>>,
}

impl PartialEq for DnlPolicy {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema
            && self.kb == other.kb
            && self.actions == other.actions
            && self.bank == other.bank
            && self.networks == other.networks
            && self.prob_floor == other.prob_floor
    }
}

impl DnlPolicy {
    pub fn new(
        schema: FeatureSchema,
        kb: TransformKb,
        actions: Vec<String>,
        cfg: &PolicyConfig,
        seed: u64,
    ) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::Config("policy needs at least one action".into()));
        }
        if !(cfg.prob_floor > 0.0) {
            return Err(Error::Config("probability floor must be positive".into()));
        }
        let bank = PredicateBank::init_equal_width(&schema, &kb, cfg.boundary_c)?;
        let n_inputs = bank.n_columns() + 2 * schema.n_discrete();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let networks = actions
            .iter()
            .map(|_| DnlNetwork::init_with_rng(cfg.n_terms, n_inputs, cfg.membership_c, &cfg.init, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            schema,
            kb,
            actions,
            bank,
            networks,
            prob_floor: cfg.prob_floor,
            labels: OnceLock::new(),
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn kb(&self) -> &TransformKb {
        &self.kb
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn bank(&self) -> &PredicateBank {
        &self.bank
    }

    pub fn networks(&self) -> &[DnlNetwork] {
        &self.networks
    }

    pub fn networks_mut(&mut self) -> &mut [DnlNetwork] {
        &mut self.networks
    }

    pub fn prob_floor(&self) -> f64 {
        self.prob_floor
    }

    pub fn n_inputs(&self) -> usize {
        self.networks[0].n_inputs()
    }

    pub fn labels(&self) -> Arc<[ColumnLabel]> {
        self.labels
            .get_or_init(|| column_labels(&self.schema, &self.bank).into())
            .clone()
    }

    /// Preprocesses a raw observation: discrete features become Booleans,
    /// continuous features pass through, and registered transforms add their
    /// transformed value alongside the raw one.
    pub fn process_state(&self, raw: &[f64]) -> Result<ProcessedState> {
        check_dim("raw state", self.schema.len(), raw.len())?;
        let mut continuous = Vec::with_capacity(self.bank.blocks().len());
        let mut discrete = Vec::with_capacity(self.schema.n_discrete());
        for (f, &v) in self.schema.features().iter().zip(raw) {
            check_finite(&f.name, v)?;
            if f.is_discrete() {
                discrete.push(v > 0.5);
            }
        }
        for block in self.bank.blocks() {
            continuous.push(match block.source {
                BlockSource::Raw { feature } => raw[feature],
                BlockSource::Transformed { feature, transform } => transform.apply(raw[feature]),
            });
        }
        Ok(ProcessedState { continuous, discrete })
    }

    pub fn process_batch(&self, raw: &[&[f64]]) -> Result<Vec<ProcessedState>> {
        raw.iter().map(|s| self.process_state(s)).collect()
    }

    /// Value of a named block (`PoleAngle`, `PoleAngleSine`) or discrete feature (0/1).
    pub fn processed_value(&self, state: &ProcessedState, name: &str) -> Option<f64> {
        if let Some(i) = self.bank.blocks().iter().position(|b| b.name == name) {
            return Some(state.continuous[i]);
        }
        self.schema
            .discrete()
            .position(|(_, f)| f.name == name)
            .map(|j| if state.discrete[j] { 1.0 } else { 0.0 })
    }

    pub fn input_matrix(&self, states: &[ProcessedState]) -> Result<InputMatrix> {
        build_input_matrix(states, &self.bank, self.labels())
    }

    pub fn forward(&self, states: &[ProcessedState]) -> Result<PredicateActionPolicy> {
        Ok(self.forward_trace(states)?.output)
    }

    /// Convenience: preprocess and evaluate raw observations.
    pub fn forward_raw(&self, raw: &[&[f64]]) -> Result<PredicateActionPolicy> {
        self.forward(&self.process_batch(raw)?)
    }

    pub fn action_probs(&self, raw: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_raw(&[raw])?.probs(0).to_vec())
    }

    pub fn forward_trace(&self, states: &[ProcessedState]) -> Result<PolicyTrace> {
        let input = self.input_matrix(states)?;
        let evals: Vec<NetworkEval> = self.networks.iter().map(|n| n.evaluator()).collect();
        let na = self.networks.len();
        let np = self.networks[0].n_terms();
        let b = input.rows();
        let mut terms = vec![0.0; b * na * np];
        let mut truths = vec![0.0; b * na];
        for r in 0..b {
            let row = input.row(r);
            for (a, eval) in evals.iter().enumerate() {
                let at = (r * na + a) * np;
                truths[r * na + a] = eval.forward(row, &mut terms[at..at + np]);
            }
        }
        let mut probs = Vec::with_capacity(b * na);
        for r in 0..b {
            let t = &truths[r * na..(r + 1) * na];
            probs.extend(normalize_truths(t, self.prob_floor));
            for (a, v) in t.iter().enumerate() {
                check_finite(&format!("truth of action {}", self.actions[a]), *v)?;
            }
        }
        Ok(PolicyTrace {
            input,
            output: PredicateActionPolicy {
                n_actions: na,
                truths,
                probs,
            },
            evals,
            terms,
        })
    }

    pub fn num_params(&self) -> usize {
        self.bank.num_params() + self.networks.iter().map(|n| n.num_params()).sum::<usize>()
    }

    /// Bounds first, then each action's network.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.bank.write_params(&mut out);
        for n in &self.networks {
            n.write_params(&mut out);
        }
        out
    }

    pub fn set_params(&mut self, src: &[f64]) -> Result<()> {
        check_dim("policy parameters", self.num_params(), src.len())?;
        let mut at = self.bank.read_params(src);
        for n in &mut self.networks {
            at += n.read_params(&src[at..]);
        }
        Ok(())
    }

    /// Gradient of `Σ d_truths · X` with respect to [`params`](Self::params).
    pub fn backward_truths(&self, trace: &PolicyTrace, d_truths: &[f64]) -> Vec<f64> {
        let na = self.networks.len();
        let np = self.networks[0].n_terms();
        let ne = self.n_inputs();
        let b = trace.input.rows();
        let mut grad = vec![0.0; self.num_params()];
        let mut grad_input = vec![0.0; b * ne];
        let bank_len = self.bank.num_params();
        let net_len = self.networks[0].num_params();
        {
            let (_, net_grads) = grad.split_at_mut(bank_len);
            for r in 0..b {
                let row = trace.input.row(r);
                let gi = &mut grad_input[r * ne..(r + 1) * ne];
                for (a, eval) in trace.evals.iter().enumerate() {
                    let up = d_truths[r * na + a];
                    let at = (r * na + a) * np;
                    eval.backward(
                        row,
                        &trace.terms[at..at + np],
                        up,
                        &mut net_grads[a * net_len..(a + 1) * net_len],
                        Some(&mut *gi),
                    );
                }
            }
        }
        self.bank.backward(&trace.input, &grad_input, &mut grad[..bank_len]);
        grad
    }

    /// Gradient of `Σ d_probs · π` with respect to [`params`](Self::params).
    pub fn backward_probs(&self, trace: &PolicyTrace, d_probs: &[f64]) -> Vec<f64> {
        let na = self.networks.len();
        let b = trace.input.rows();
        let mut d_truths = vec![0.0; b * na];
        for r in 0..b {
            normalize_backward(
                trace.output.truths(r),
                trace.output.probs(r),
                &d_probs[r * na..(r + 1) * na],
                self.prob_floor,
                &mut d_truths[r * na..(r + 1) * na],
            );
        }
        self.backward_truths(trace, &d_truths)
    }
}
