//! Boundary predicates over state features and the input matrix they build.
//!
//! Every continuous feature (and every registered non-linear transform of one)
//! owns `k` bins. Bin `i` contributes two columns: `x > gtᵢ` and `x < ltᵢ`,
//! each realised as a sigmoid of the signed distance to a trainable bound.
//! Discrete Boolean features contribute a one-hot `(true, false)` pair.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::logic::sigmoid;
use crate::policy::ProcessedState;

/// Default steepness of boundary predicates.
pub const DEFAULT_BOUNDARY_C: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous { low: f64, high: f64, bins: usize },
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl Feature {
    pub fn continuous(name: &str, low: f64, high: f64, bins: usize) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Continuous { low, high, bins },
        }
    }

    pub fn discrete(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Discrete,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, FeatureKind::Discrete)
    }
}

/// Ordered state features; the order matches the raw observation vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    features: Vec<Feature>,
}

impl FeatureSchema {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        let mut problems = Vec::new();
        for (i, f) in features.iter().enumerate() {
            if features[..i].iter().any(|g| g.name == f.name) {
                problems.push(format!("duplicate feature name {}", f.name));
            }
            if let FeatureKind::Continuous { low, high, bins } = f.kind {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    problems.push(format!("feature {}: need finite low < high, got [{low}, {high}]", f.name));
                }
                if bins == 0 {
                    problems.push(format!("feature {}: bin count must be >= 1", f.name));
                }
            }
        }
        if problems.is_empty() {
            Ok(Self { features })
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn continuous(&self) -> impl Iterator<Item = (usize, &Feature)> {
        self.features.iter().enumerate().filter(|(_, f)| !f.is_discrete())
    }

    pub fn discrete(&self) -> impl Iterator<Item = (usize, &Feature)> {
        self.features.iter().enumerate().filter(|(_, f)| f.is_discrete())
    }

    pub fn n_discrete(&self) -> usize {
        self.discrete().count()
    }
}

/// Unary functions available to the transformation knowledge base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Sine,
    Cosine,
    Square,
}

impl Transform {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Sine => x.sin(),
            Transform::Cosine => x.cos(),
            Transform::Square => x * x,
        }
    }

    /// Appended to the feature name in atom labels (`PoleAngle` → `PoleAngleSine`).
    pub fn suffix(self) -> &'static str {
        match self {
            Transform::Sine => "Sine",
            Transform::Cosine => "Cosine",
            Transform::Square => "Square",
        }
    }

    /// Codomain used for binning when no explicit range is configured.
    pub fn default_range(self, low: f64, high: f64) -> (f64, f64) {
        match self {
            Transform::Sine | Transform::Cosine => (-1.0, 1.0),
            Transform::Square => {
                let (a, b) = (low * low, high * high);
                if low < 0.0 && high > 0.0 {
                    (0.0, a.max(b))
                } else {
                    (a.min(b), a.max(b))
                }
            }
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Transform::Sine => "sine",
            Transform::Cosine => "cosine",
            Transform::Square => "square",
        };
        f.write_str(s)
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sine" | "sin" => Ok(Transform::Sine),
            "cosine" | "cos" => Ok(Transform::Cosine),
            "square" | "sqr" => Ok(Transform::Square),
            other => Err(Error::Config(format!("unknown transform function '{other}'"))),
        }
    }
}

/// One knowledge-base registration: feature → transform, with optional binning overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub feature: String,
    pub transform: Transform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
}

impl TransformSpec {
    pub fn new(feature: &str, transform: Transform) -> Self {
        Self {
            feature: feature.to_string(),
            transform,
            range: None,
            bins: None,
        }
    }
}

/// Transformation knowledge base: continuous features mapped to a non-linear function.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformKb {
    entries: Vec<TransformSpec>,
}

impl TransformKb {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validates every registration against `schema` and sorts them into schema order.
    pub fn new(mut entries: Vec<TransformSpec>, schema: &FeatureSchema) -> Result<Self> {
        let mut problems = Vec::new();
        for (i, e) in entries.iter().enumerate() {
            match schema.index_of(&e.feature) {
                None => problems.push(format!("transform registered for unknown feature {}", e.feature)),
                Some(j) if schema.features()[j].is_discrete() => {
                    problems.push(format!("transform registered for discrete feature {}", e.feature))
                }
                Some(_) => {}
            }
            if entries[..i].iter().any(|o| o.feature == e.feature) {
                problems.push(format!("feature {} has more than one transform", e.feature));
            }
            if let Some((lo, hi)) = e.range {
                if !(lo < hi) {
                    problems.push(format!("transform range for {} needs low < high", e.feature));
                }
            }
            if e.bins == Some(0) {
                problems.push(format!("transform bins for {} must be >= 1", e.feature));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems.join("; ")));
        }
        entries.sort_by_key(|e| schema.index_of(&e.feature));
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[TransformSpec] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, feature: &str) -> Option<&TransformSpec> {
        self.entries.iter().find(|e| e.feature == feature)
    }
}

/// Where the value feeding a block of bounds comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BlockSource {
    Raw { feature: usize },
    Transformed { feature: usize, transform: Transform },
}

/// The `k` (gt, lt) bound pairs for one continuous value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundBlock {
    pub name: String,
    pub source: BlockSource,
    pub gt: Vec<f64>,
    pub lt: Vec<f64>,
}

impl BoundBlock {
    pub fn bins(&self) -> usize {
        self.gt.len()
    }
}

/// Equal-width bin edges: `(lᵢ, uᵢ)` for `i = 1..=k`.
pub fn equal_width_bins(low: f64, high: f64, k: usize) -> Result<Vec<(f64, f64)>> {
    if k == 0 {
        return Err(Error::Config("bin count must be >= 1".into()));
    }
    if !(low < high) {
        return Err(Error::Config(format!("need low < high, got [{low}, {high}]")));
    }
    let w = (high - low) / k as f64;
    Ok((0..k)
        .map(|i| (low + i as f64 * w, low + (i + 1) as f64 * w))
        .collect())
}

/// Trainable bounds of every continuous and transform predicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateBank {
    blocks: Vec<BoundBlock>,
    c: f64,
}

impl PredicateBank {
    /// Equal-width initialisation: `gtᵢ ← lᵢ` and `ltᵢ ← uᵢ`, so `gtᵢ ∧ ltᵢ` is bin `i`.
    ///
    /// Raw continuous features come first in schema order, then transforms.
    pub fn init_equal_width(schema: &FeatureSchema, kb: &TransformKb, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Config(format!("boundary steepness must be positive, got {c}")));
        }
        let mut blocks = Vec::new();
        for (i, f) in schema.continuous() {
            let FeatureKind::Continuous { low, high, bins } = f.kind else {
                unreachable!()
            };
            blocks.push(Self::block(f.name.clone(), BlockSource::Raw { feature: i }, low, high, bins)?);
        }
        for spec in kb.entries() {
            let i = schema
                .index_of(&spec.feature)
                .ok_or_else(|| Error::Config(format!("unknown feature {}", spec.feature)))?;
            let FeatureKind::Continuous { low, high, bins } = schema.features()[i].kind else {
                return Err(Error::Config(format!("cannot transform discrete feature {}", spec.feature)));
            };
            let (lo, hi) = spec.range.unwrap_or_else(|| spec.transform.default_range(low, high));
            blocks.push(Self::block(
                format!("{}{}", spec.feature, spec.transform.suffix()),
                BlockSource::Transformed {
                    feature: i,
                    transform: spec.transform,
                },
                lo,
                hi,
                spec.bins.unwrap_or(bins),
            )?);
        }
        Ok(Self { blocks, c })
    }

    fn block(name: String, source: BlockSource, low: f64, high: f64, bins: usize) -> Result<BoundBlock> {
        let edges = equal_width_bins(low, high, bins).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{name}: {msg}")),
            other => other,
        })?;
        Ok(BoundBlock {
            name,
            source,
            gt: edges.iter().map(|e| e.0).collect(),
            lt: edges.iter().map(|e| e.1).collect(),
        })
    }

    pub fn blocks(&self) -> &[BoundBlock] {
        &self.blocks
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn n_columns(&self) -> usize {
        self.blocks.iter().map(|b| 2 * b.bins()).sum()
    }

    pub fn num_params(&self) -> usize {
        self.n_columns()
    }

    /// Appends bounds block by block: all `gt` then all `lt`.
    pub fn write_params(&self, out: &mut Vec<f64>) {
        for b in &self.blocks {
            out.extend_from_slice(&b.gt);
            out.extend_from_slice(&b.lt);
        }
    }

    pub fn read_params(&mut self, src: &[f64]) -> usize {
        let mut at = 0;
        for b in &mut self.blocks {
            let k = b.gt.len();
            b.gt.copy_from_slice(&src[at..at + k]);
            b.lt.copy_from_slice(&src[at + k..at + 2 * k]);
            at += 2 * k;
        }
        at
    }

    pub fn all_finite(&self) -> bool {
        self.blocks
            .iter()
            .all(|b| b.gt.iter().chain(&b.lt).all(|v| v.is_finite()))
    }

    /// Writes the `2k` predicate values of `block` at `x` into `out` as (gt, lt) pairs.
    #[inline]
    pub fn eval_block(&self, block: usize, x: f64, out: &mut [f64]) {
        let b = &self.blocks[block];
        for i in 0..b.bins() {
            out[2 * i] = eval_gt(x, b.gt[i], self.c);
            out[2 * i + 1] = eval_lt(x, b.lt[i], self.c);
        }
    }

    /// Accumulates bound gradients from `grad_input = ∂L/∂I` (same shape as `input`).
    pub fn backward(&self, input: &InputMatrix, grad_input: &[f64], grad: &mut [f64]) {
        let cols = input.cols;
        for (row, grow) in input.values.chunks(cols).zip(grad_input.chunks(cols)) {
            let mut col = 0;
            let mut at = 0;
            for b in &self.blocks {
                let k = b.bins();
                for i in 0..k {
                    let g = row[col];
                    let l = row[col + 1];
                    // ∂σ(c(x−b))/∂b = −c·σ(1−σ); ∂σ(−c(x−b))/∂b = c·σ(1−σ)
                    grad[at + i] -= grow[col] * self.c * g * (1.0 - g);
                    grad[at + k + i] += grow[col + 1] * self.c * l * (1.0 - l);
                    col += 2;
                }
                at += 2 * k;
            }
        }
    }
}

/// `σ(c·(x − bound))`: soft `x > bound`.
#[inline]
pub fn eval_gt(x: f64, bound: f64, c: f64) -> f64 {
    sigmoid(c * (x - bound))
}

/// `σ(−c·(x − bound))`: soft `x < bound`.
#[inline]
pub fn eval_lt(x: f64, bound: f64, c: f64) -> f64 {
    sigmoid(-c * (x - bound))
}

/// Applies `transform` and evaluates `block`'s predicates on the result.
pub fn eval_transform_predicates(
    x: f64,
    transform: &str,
    kb: &TransformKb,
    feature: &str,
    bank: &PredicateBank,
) -> Result<Vec<f64>> {
    let t: Transform = transform.parse()?;
    let spec = kb
        .get(feature)
        .filter(|s| s.transform == t)
        .ok_or_else(|| Error::Config(format!("{transform} is not registered for feature {feature}")))?;
    let block = bank
        .blocks()
        .iter()
        .position(|b| matches!(b.source, BlockSource::Transformed { transform, .. } if transform == spec.transform)
            && b.name == format!("{}{}", feature, t.suffix()))
        .ok_or_else(|| Error::Config(format!("no bounds for {feature}{}", t.suffix())))?;
    let mut out = vec![0.0; 2 * bank.blocks()[block].bins()];
    bank.eval_block(block, t.apply(x), &mut out);
    Ok(out)
}

/// One-hot `(F_e, F_¬e)`.
#[inline]
pub fn encode_discrete(value: bool) -> (f64, f64) {
    if value {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    }
}

/// `N_e = 2·Σk over continuous and transform blocks + 2·|discrete|`.
pub fn input_width(schema: &FeatureSchema, kb: &TransformKb) -> usize {
    let cont: usize = schema
        .continuous()
        .map(|(_, f)| match f.kind {
            FeatureKind::Continuous { bins, .. } => 2 * bins,
            FeatureKind::Discrete => 0,
        })
        .sum();
    let trans: usize = kb
        .entries()
        .iter()
        .map(|e| {
            let bins = e.bins.unwrap_or_else(|| match schema.index_of(&e.feature).map(|i| &schema.features()[i].kind) {
                Some(FeatureKind::Continuous { bins, .. }) => *bins,
                _ => 0,
            });
            2 * bins
        })
        .sum();
    cont + trans + 2 * schema.n_discrete()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    Greater { block: usize, bin: usize },
    Less { block: usize, bin: usize },
    IsTrue { feature: usize },
    IsFalse { feature: usize },
}

/// Describes one input-matrix column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnLabel {
    /// Feature or transform block name, e.g. `PoleAngleSine`.
    pub name: String,
    pub kind: ColumnKind,
}

/// Labels for every column in input-matrix order.
pub fn column_labels(schema: &FeatureSchema, bank: &PredicateBank) -> Vec<ColumnLabel> {
    let mut labels = Vec::with_capacity(bank.n_columns() + 2 * schema.n_discrete());
    for (bi, b) in bank.blocks().iter().enumerate() {
        for bin in 0..b.bins() {
            labels.push(ColumnLabel {
                name: b.name.clone(),
                kind: ColumnKind::Greater { block: bi, bin },
            });
            labels.push(ColumnLabel {
                name: b.name.clone(),
                kind: ColumnKind::Less { block: bi, bin },
            });
        }
    }
    for (i, f) in schema.discrete() {
        labels.push(ColumnLabel {
            name: f.name.clone(),
            kind: ColumnKind::IsTrue { feature: i },
        });
        labels.push(ColumnLabel {
            name: f.name.clone(),
            kind: ColumnKind::IsFalse { feature: i },
        });
    }
    labels
}

/// Batch × `N_e` matrix of predicate truth values.
#[derive(Debug, Clone, PartialEq)]
pub struct InputMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    labels: Arc<[ColumnLabel]>,
}

impl InputMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn labels(&self) -> &[ColumnLabel] {
        &self.labels
    }
}

/// Assembles the input matrix: bound-predicate pairs per block, then discrete pairs.
pub fn build_input_matrix(
    states: &[ProcessedState],
    bank: &PredicateBank,
    labels: Arc<[ColumnLabel]>,
) -> Result<InputMatrix> {
    let n_blocks = bank.blocks().len();
    let cols = labels.len();
    let n_cont = bank.n_columns();
    check_dim("input matrix labels", n_cont + 2 * ((cols - n_cont) / 2), cols)?;
    let mut values = vec![0.0; states.len() * cols];
    for (s, row) in states.iter().zip(values.chunks_mut(cols)) {
        check_dim("processed continuous values", n_blocks, s.continuous.len())?;
        check_dim("processed discrete values", (cols - n_cont) / 2, s.discrete.len())?;
        let mut at = 0;
        for (bi, &x) in s.continuous.iter().enumerate() {
            let k = bank.blocks()[bi].bins();
            bank.eval_block(bi, x, &mut row[at..at + 2 * k]);
            at += 2 * k;
        }
        for &d in &s.discrete {
            let (t, f) = encode_discrete(d);
            row[at] = t;
            row[at + 1] = f;
            at += 2;
        }
    }
    Ok(InputMatrix {
        rows: states.len(),
        cols,
        values,
        labels,
    })
}
