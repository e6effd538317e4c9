//! Differentiable fuzzy-Boolean logic layers.
//!
//! A conjunction neuron computes `∏ᵢ (1 − mᵢ·(1 − xᵢ))` and a disjunction
//! neuron computes `1 − ∏ᵢ (1 − mᵢ·xᵢ)`, where every membership `mᵢ ∈ (0, 1)`
//! is a squashed trainable weight. With crisp memberships and inputs these
//! reduce to Boolean AND / OR over the included literals.
//!
//! A [`DnlNetwork`] stacks `N_p` conjunction neurons over an `N_e`-wide input
//! row and one disjunction neuron over their outputs. Gradients are derived in
//! closed form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Memberships live in `[MEMBERSHIP_EPS, 1 − MEMBERSHIP_EPS]`.
pub const MEMBERSHIP_EPS: f64 = 1e-12;

/// Default sharpening constant of the membership sigmoid.
pub const DEFAULT_MEMBERSHIP_C: f64 = 6.0;

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Membership value for a raw weight, squeezed into `[ε, 1 − ε]`.
#[inline]
pub fn membership(raw: f64, c: f64) -> f64 {
    MEMBERSHIP_EPS + (1.0 - 2.0 * MEMBERSHIP_EPS) * sigmoid(c * raw)
}

/// Derivative of [`membership`] with respect to the raw weight.
#[inline]
pub fn membership_grad(raw: f64, c: f64) -> f64 {
    let s = sigmoid(c * raw);
    (1.0 - 2.0 * MEMBERSHIP_EPS) * c * s * (1.0 - s)
}

/// Row-major matrix of raw membership weights with its sharpening constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipWeights {
    rows: usize,
    cols: usize,
    raw: Vec<f64>,
    c: f64,
}

impl MembershipWeights {
    pub fn new(rows: usize, cols: usize, raw: Vec<f64>, c: f64) -> Result<Self> {
        check_dim("membership weights", rows * cols, raw.len())?;
        if !(c >= 1.0) {
            return Err(Error::Config(format!(
                "membership sharpening constant must be >= 1, got {c}"
            )));
        }
        Ok(Self { rows, cols, raw, c })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.raw
    }

    pub fn raw_row(&self, row: usize) -> &[f64] {
        &self.raw[row * self.cols..(row + 1) * self.cols]
    }

    pub fn membership(&self, row: usize, col: usize) -> f64 {
        membership(self.raw[row * self.cols + col], self.c)
    }

    pub fn memberships(&self) -> Vec<f64> {
        self.raw.iter().map(|&w| membership(w, self.c)).collect()
    }

    pub fn membership_row(&self, row: usize) -> Vec<f64> {
        self.raw_row(row)
            .iter()
            .map(|&w| membership(w, self.c))
            .collect()
    }
}

fn check_unit(context: &'static str, values: &[f64]) -> Result<()> {
    const TOL: f64 = 1e-9;
    match values.iter().find(|v| !(**v >= -TOL && **v <= 1.0 + TOL)) {
        Some(v) => Err(Error::Numeric(format!("{context}: value {v} outside [0, 1]"))),
        None => Ok(()),
    }
}

/// `∏ᵢ (1 − mᵢ·(1 − xᵢ))`.
pub fn neural_conjunction(x: &[f64], m: &[f64]) -> Result<f64> {
    check_dim("neural conjunction", m.len(), x.len())?;
    check_unit("conjunction input", x)?;
    check_unit("conjunction membership", m)?;
    Ok(conj_unchecked(x, m))
}

/// `1 − ∏ᵢ (1 − mᵢ·xᵢ)`.
pub fn neural_disjunction(x: &[f64], m: &[f64]) -> Result<f64> {
    check_dim("neural disjunction", m.len(), x.len())?;
    check_unit("disjunction input", x)?;
    check_unit("disjunction membership", m)?;
    Ok(disj_unchecked(x, m))
}

#[inline]
fn conj_unchecked(x: &[f64], m: &[f64]) -> f64 {
    x.iter()
        .zip(m)
        .map(|(&xi, &mi)| 1.0 - mi * (1.0 - xi))
        .product()
}

#[inline]
fn disj_unchecked(x: &[f64], m: &[f64]) -> f64 {
    1.0 - x
        .iter()
        .zip(m)
        .map(|(&xi, &mi)| 1.0 - mi * xi)
        .product::<f64>()
}

/// Parameters of the negative-mean Gaussian used to draw initial raw weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightInit {
    pub mean: f64,
    pub std: f64,
}

impl Default for WeightInit {
    fn default() -> Self {
        Self {
            mean: -0.5,
            std: 0.1,
        }
    }
}

impl WeightInit {
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<f64> {
        let normal = Normal::new(self.mean, self.std.max(0.0)).expect("finite std");
        (0..n).map(|_| normal.sample(rng)).collect()
    }
}

/// One action predicate: `N_p` conjunction neurons feeding one disjunction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnlNetwork {
    conj: MembershipWeights,
    disj: MembershipWeights,
}

impl DnlNetwork {
    pub fn new(conj: MembershipWeights, disj: MembershipWeights) -> Result<Self> {
        check_dim("disjunction rows", 1, disj.rows())?;
        check_dim("disjunction width", conj.rows(), disj.cols())?;
        Ok(Self { conj, disj })
    }

    /// Draws both layers from `init`; identical seeds give identical weights.
    pub fn init(n_terms: usize, n_inputs: usize, c: f64, init: &WeightInit, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with_rng(n_terms, n_inputs, c, init, &mut rng)
    }

    pub fn init_with_rng(
        n_terms: usize,
        n_inputs: usize,
        c: f64,
        init: &WeightInit,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if n_terms == 0 || n_inputs == 0 {
            return Err(Error::Config(format!(
                "network needs at least one term and one input (got {n_terms}x{n_inputs})"
            )));
        }
        let conj = MembershipWeights::new(n_terms, n_inputs, init.sample(n_terms * n_inputs, rng), c)?;
        let disj = MembershipWeights::new(1, n_terms, init.sample(n_terms, rng), c)?;
        Self::new(conj, disj)
    }

    pub fn n_terms(&self) -> usize {
        self.conj.rows()
    }

    pub fn n_inputs(&self) -> usize {
        self.conj.cols()
    }

    pub fn conjunction(&self) -> &MembershipWeights {
        &self.conj
    }

    pub fn disjunction(&self) -> &MembershipWeights {
        &self.disj
    }

    pub fn num_params(&self) -> usize {
        self.conj.raw.len() + self.disj.raw.len()
    }

    /// Appends raw weights: conjunction row-major, then disjunction.
    pub fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.conj.raw);
        out.extend_from_slice(&self.disj.raw);
    }

    /// Reads weights in [`write_params`](Self::write_params) order; returns the count consumed.
    pub fn read_params(&mut self, src: &[f64]) -> usize {
        let nc = self.conj.raw.len();
        let nd = self.disj.raw.len();
        self.conj.raw.copy_from_slice(&src[..nc]);
        self.disj.raw.copy_from_slice(&src[nc..nc + nd]);
        nc + nd
    }

    /// Snapshot of memberships and their raw-weight derivatives.
    pub fn evaluator(&self) -> NetworkEval {
        let c = self.conj.c;
        let cd = self.disj.c;
        NetworkEval {
            n_terms: self.n_terms(),
            n_inputs: self.n_inputs(),
            conj_m: self.conj.raw.iter().map(|&w| membership(w, c)).collect(),
            conj_dm: self.conj.raw.iter().map(|&w| membership_grad(w, c)).collect(),
            disj_m: self.disj.raw.iter().map(|&w| membership(w, cd)).collect(),
            disj_dm: self.disj.raw.iter().map(|&w| membership_grad(w, cd)).collect(),
        }
    }

    /// `F_disj(N_p, F_conj(N_e, row))`.
    pub fn forward(&self, row: &[f64]) -> Result<f64> {
        check_dim("action predicate input", self.n_inputs(), row.len())?;
        check_unit("action predicate input", row)?;
        let eval = self.evaluator();
        let mut terms = vec![0.0; self.n_terms()];
        Ok(eval.forward(row, &mut terms))
    }

    /// Row-wise [`forward`](Self::forward) over a row-major batch.
    pub fn forward_batch(&self, rows: &[f64]) -> Result<Vec<f64>> {
        let n = self.n_inputs();
        if rows.len() % n != 0 {
            return Err(Error::Dimension {
                context: "action predicate batch",
                expected: n,
                actual: rows.len() % n,
            });
        }
        check_unit("action predicate input", rows)?;
        let eval = self.evaluator();
        let mut terms = vec![0.0; self.n_terms()];
        Ok(rows.chunks(n).map(|r| eval.forward(r, &mut terms)).collect())
    }
}

/// Frozen memberships of a [`DnlNetwork`] for batched forward/backward passes.
#[derive(Debug, Clone)]
pub struct NetworkEval {
    n_terms: usize,
    n_inputs: usize,
    conj_m: Vec<f64>,
    conj_dm: Vec<f64>,
    disj_m: Vec<f64>,
    disj_dm: Vec<f64>,
}

impl NetworkEval {
    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn conj_memberships(&self) -> &[f64] {
        &self.conj_m
    }

    pub fn disj_memberships(&self) -> &[f64] {
        &self.disj_m
    }

    /// Evaluates one row, leaving the conjunction outputs in `terms`.
    #[inline]
    pub fn forward(&self, row: &[f64], terms: &mut [f64]) -> f64 {
        debug_assert_eq!(row.len(), self.n_inputs);
        for (j, t) in terms.iter_mut().enumerate() {
            let m = &self.conj_m[j * self.n_inputs..(j + 1) * self.n_inputs];
            *t = conj_unchecked(row, m);
        }
        disj_unchecked(terms, &self.disj_m)
    }

    /// Accumulates `upstream · ∂out/∂θ` into `grad` (laid out as
    /// [`DnlNetwork::write_params`]) and `upstream · ∂out/∂row` into `grad_input`.
    ///
    /// `terms` must hold the conjunction outputs from [`forward`](Self::forward) on `row`.
    pub fn backward(
        &self,
        row: &[f64],
        terms: &[f64],
        upstream: f64,
        grad: &mut [f64],
        mut grad_input: Option<&mut [f64]>,
    ) {
        let ne = self.n_inputs;
        let np = self.n_terms;
        if upstream == 0.0 {
            return;
        }
        let (grad_conj, grad_disj) = grad.split_at_mut(np * ne);

        // disjunction: out = 1 − ∏ g_j, g_j = 1 − d_j·t_j
        let g: Vec<f64> = terms
            .iter()
            .zip(&self.disj_m)
            .map(|(&t, &d)| 1.0 - d * t)
            .collect();
        let others = products_excluding(&g);
        let mut grad_terms = vec![0.0; np];
        for j in 0..np {
            grad_disj[j] += upstream * terms[j] * others[j] * self.disj_dm[j];
            grad_terms[j] = upstream * self.disj_m[j] * others[j];
        }

        // conjunctions: t_j = ∏ f_i, f_i = 1 − m_i·(1 − x_i)
        let mut f = vec![0.0; ne];
        for j in 0..np {
            let gt = grad_terms[j];
            if gt == 0.0 {
                continue;
            }
            let m = &self.conj_m[j * ne..(j + 1) * ne];
            let dm = &self.conj_dm[j * ne..(j + 1) * ne];
            for i in 0..ne {
                f[i] = 1.0 - m[i] * (1.0 - row[i]);
            }
            let rest = products_excluding(&f);
            let gw = &mut grad_conj[j * ne..(j + 1) * ne];
            for i in 0..ne {
                gw[i] -= gt * (1.0 - row[i]) * rest[i] * dm[i];
            }
            if let Some(gi) = grad_input.as_deref_mut() {
                for i in 0..ne {
                    gi[i] += gt * m[i] * rest[i];
                }
            }
        }
    }
}

/// `out[i] = ∏_{j≠i} v[j]` without division.
fn products_excluding(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![1.0; n];
    let mut acc = 1.0;
    for i in 0..n {
        out[i] = acc;
        acc *= v[i];
    }
    acc = 1.0;
    for i in (0..n).rev() {
        out[i] *= acc;
        acc *= v[i];
    }
    out
}
