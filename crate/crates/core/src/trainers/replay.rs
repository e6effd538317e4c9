use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Transition;
use crate::error::{check_dim, Result};

/// Fixed-capacity FIFO experience store with uniform sampling.
///
/// States live in two flat ring arrays rather than one small allocation per
/// transition; long runs otherwise fragment the system allocator badly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    /// State width, fixed by the first push.
    dim: usize,
    /// Slot the next push writes once the buffer is full.
    head: usize,
    states: Vec<f64>,
    next_states: Vec<f64>,
    actions: Vec<usize>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
    truncated: Vec<bool>,
}

/// Borrowed view of one stored transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionRef<'a> {
    pub state: &'a [f64],
    pub action: usize,
    pub reward: f64,
    pub next_state: &'a [f64],
    pub done: bool,
    pub truncated: bool,
}

impl TransitionRef<'_> {
    pub fn to_transition(self) -> Transition {
        Transition {
            state: self.state.to_vec(),
            action: self.action,
            reward: self.reward,
            next_state: self.next_state.to_vec(),
            done: self.done,
            truncated: self.truncated,
        }
    }
}

/// Sampled transitions stacked for a batched update.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBatch {
    pub states: Array2<f64>,
    pub next_states: Array2<f64>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
}

impl ReplayBatch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn state_rows(&self) -> Vec<&[f64]> {
        rows(&self.states)
    }

    pub fn next_state_rows(&self) -> Vec<&[f64]> {
        rows(&self.next_states)
    }
}

fn rows(m: &Array2<f64>) -> Vec<&[f64]> {
    m.as_slice()
        .expect("standard layout")
        .chunks(m.ncols().max(1))
        .take(m.nrows())
        .collect()
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            dim: 0,
            head: 0,
            states: Vec::new(),
            next_states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            dones: Vec::new(),
            truncated: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Appends, evicting the oldest transition when full.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        if self.is_empty() {
            self.dim = t.state.len();
        }
        check_dim("replay state", self.dim, t.state.len())?;
        check_dim("replay next state", self.dim, t.next_state.len())?;
        if self.len() < self.capacity {
            self.states.extend_from_slice(&t.state);
            self.next_states.extend_from_slice(&t.next_state);
            self.actions.push(t.action);
            self.rewards.push(t.reward);
            self.dones.push(t.done);
            self.truncated.push(t.truncated);
        } else {
            let (d, slot) = (self.dim, self.head);
            self.states[slot * d..(slot + 1) * d].copy_from_slice(&t.state);
            self.next_states[slot * d..(slot + 1) * d].copy_from_slice(&t.next_state);
            self.actions[slot] = t.action;
            self.rewards[slot] = t.reward;
            self.dones[slot] = t.done;
            self.truncated[slot] = t.truncated;
            self.head = (slot + 1) % self.capacity;
        }
        Ok(())
    }

    /// Storage slot of the `i`-th oldest transition.
    fn slot(&self, i: usize) -> usize {
        if self.len() < self.capacity {
            i
        } else {
            (self.head + i) % self.capacity
        }
    }

    /// The `i`-th oldest transition.
    pub fn get(&self, i: usize) -> Option<TransitionRef<'_>> {
        if i >= self.len() {
            return None;
        }
        let (s, d) = (self.slot(i), self.dim);
        Some(TransitionRef {
            state: &self.states[s * d..(s + 1) * d],
            action: self.actions[s],
            reward: self.rewards[s],
            next_state: &self.next_states[s * d..(s + 1) * d],
            done: self.dones[s],
            truncated: self.truncated[s],
        })
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = TransitionRef<'_>> {
        (0..self.len()).map(|i| self.get(i).expect("in range"))
    }

    /// Uniform indices with replacement.
    pub fn sample_indices(&self, n: usize, rng: &mut impl Rng) -> Vec<usize> {
        if self.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| rng.random_range(0..self.len())).collect()
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<TransitionRef<'_>> {
        self.sample_indices(n, rng)
            .into_iter()
            .map(|i| self.get(i).expect("in range"))
            .collect()
    }

    /// Stacks the transitions at `indices` (as returned by [`sample_indices`](Self::sample_indices)).
    pub fn batch(&self, indices: &[usize]) -> ReplayBatch {
        let d = self.dim;
        let n = indices.len();
        let mut states = Vec::with_capacity(n * d);
        let mut next_states = Vec::with_capacity(n * d);
        let mut actions = Vec::with_capacity(n);
        let mut rewards = Vec::with_capacity(n);
        let mut dones = Vec::with_capacity(n);
        for &i in indices {
            let t = self.get(i).expect("sampled index in range");
            states.extend_from_slice(t.state);
            next_states.extend_from_slice(t.next_state);
            actions.push(t.action);
            rewards.push(t.reward);
            dones.push(t.done);
        }
        ReplayBatch {
            states: Array2::from_shape_vec((n, d), states).expect("batch shape"),
            next_states: Array2::from_shape_vec((n, d), next_states).expect("batch shape"),
            actions,
            rewards,
            dones,
        }
    }
}
