//! Reading first-order policy rules out of trained dNL networks.

use std::fmt::{self, Write as _};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{argmax, DnlPolicy, ProcessedState};
use crate::predicates::ColumnKind;

pub const DEFAULT_KEEP: f64 = 0.5;
pub const DEFAULT_CONFIDENT: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "bound", rename_all = "snake_case")]
pub enum Comparison {
    Greater(f64),
    Less(f64),
    IsTrue,
    IsFalse,
}

/// One literal of a rule body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    /// Input-matrix column the literal was read from.
    pub column: usize,
    pub name: String,
    pub comparison: Comparison,
    /// Index into the processed state: the bound block for comparisons,
    /// the discrete feature (in discrete order) for Boolean literals.
    pub source: usize,
    pub membership: f64,
    pub confident: bool,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.confident {
            write!(f, "[{:.2}]", self.membership)?;
        }
        match self.comparison {
            Comparison::Greater(b) => write!(f, "{}>{}", self.name, fmt_bound(b)),
            Comparison::Less(b) => write!(f, "{}<{}", self.name, fmt_bound(b)),
            Comparison::IsTrue => write!(f, "{}True", self.name),
            Comparison::IsFalse => write!(f, "{}False", self.name),
        }
    }
}

// avoid printing "-0.00"
fn fmt_bound(b: f64) -> String {
    let s = format!("{b:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// One disjunct of an action's definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedRule {
    pub action: String,
    pub action_index: usize,
    /// Index of the conjunction neuron within the action's network.
    pub term: usize,
    pub membership: f64,
    pub confident: bool,
    pub atoms: Vec<Atom>,
}

impl ExtractedRule {
    /// Crisp truth of the body: every atom holds (an empty body is true).
    pub fn holds(&self, state: &ProcessedState) -> bool {
        self.atoms.iter().all(|a| match a.comparison {
            Comparison::Greater(b) => state.continuous[a.source] > b,
            Comparison::Less(b) => state.continuous[a.source] < b,
            Comparison::IsTrue => state.discrete[a.source],
            Comparison::IsFalse => !state.discrete[a.source],
        })
    }

    fn body(&self) -> String {
        let atoms: Vec<String> = self.atoms.iter().map(|a| a.to_string()).collect();
        let body = if atoms.is_empty() {
            "⊤".to_string()
        } else {
            format!("({})", atoms.join(" ∧ "))
        };
        if self.confident {
            body
        } else {
            format!("[{:.2}] {body}", self.membership)
        }
    }
}

fn check_thresholds(keep: f64, confident: f64) -> Result<()> {
    if keep > 0.0 && keep <= confident && confident <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "rule thresholds need 0 < keep <= confident <= 1, got keep={keep}, confident={confident}"
        )))
    }
}

/// Disjunction neurons with membership ≥ `keep` become rules; their conjunction
/// memberships ≥ `keep` become atoms. Memberships ≥ `confident` carry no weight.
pub fn extract_policy(policy: &DnlPolicy, keep: f64, confident: f64) -> Result<Vec<ExtractedRule>> {
    check_thresholds(keep, confident)?;
    let labels = policy.labels();
    let n_blocks = policy.bank().blocks().len();
    let discrete_pos: Vec<usize> = policy.schema().discrete().map(|(i, _)| i).collect();
    let mut rules = Vec::new();
    for (a, net) in policy.networks().iter().enumerate() {
        let disj = net.disjunction().memberships();
        for (j, &d) in disj.iter().enumerate() {
            if d < keep {
                continue;
            }
            let conj = net.conjunction().membership_row(j);
            let atoms = conj
                .iter()
                .enumerate()
                .filter(|(_, &m)| m >= keep)
                .map(|(col, &m)| {
                    let label = &labels[col];
                    let bank = policy.bank().blocks();
                    let (comparison, source) = match label.kind {
                        ColumnKind::Greater { block, bin } => (Comparison::Greater(bank[block].gt[bin]), block),
                        ColumnKind::Less { block, bin } => (Comparison::Less(bank[block].lt[bin]), block),
                        ColumnKind::IsTrue { feature } => (Comparison::IsTrue, discrete_index(&discrete_pos, feature)),
                        ColumnKind::IsFalse { feature } => {
                            (Comparison::IsFalse, discrete_index(&discrete_pos, feature))
                        }
                    };
                    debug_assert!(matches!(comparison, Comparison::IsTrue | Comparison::IsFalse) || source < n_blocks);
                    Atom {
                        column: col,
                        name: label.name.clone(),
                        comparison,
                        source,
                        membership: m,
                        confident: m >= confident,
                    }
                })
                .collect();
            rules.push(ExtractedRule {
                action: policy.actions()[a].clone(),
                action_index: a,
                term: j,
                membership: d,
                confident: d >= confident,
                atoms,
            });
        }
    }
    Ok(rules)
}

fn discrete_index(positions: &[usize], feature: usize) -> usize {
    positions.iter().position(|&p| p == feature).expect("discrete feature")
}

/// Crisp action truth values in {0, 1}: an action holds if any of its rules fires.
pub fn crisp_evaluate(rules: &[ExtractedRule], n_actions: usize, state: &ProcessedState) -> Vec<f64> {
    let mut out = vec![0.0; n_actions];
    for r in rules {
        if out[r.action_index] == 0.0 && r.holds(state) {
            out[r.action_index] = 1.0;
        }
    }
    out
}

/// Crisp action for a raw observation (lowest index among true actions, else 0).
pub fn crisp_action(policy: &DnlPolicy, rules: &[ExtractedRule], raw: &[f64]) -> Result<usize> {
    let s = policy.process_state(raw)?;
    Ok(argmax(&crisp_evaluate(rules, policy.n_actions(), &s)))
}

/// Fraction of states on which the crisp rule argmax equals the fuzzy policy argmax.
pub fn fidelity(policy: &DnlPolicy, rules: &[ExtractedRule], states: &[Vec<f64>]) -> Result<f64> {
    if states.is_empty() {
        return Ok(1.0);
    }
    let mut agree = 0usize;
    for chunk in states.chunks(512) {
        let raw: Vec<&[f64]> = chunk.iter().map(|s| s.as_slice()).collect();
        let processed = policy.process_batch(&raw)?;
        let fuzzy = policy.forward(&processed)?;
        for (i, s) in processed.iter().enumerate() {
            let crisp = argmax(&crisp_evaluate(rules, policy.n_actions(), s));
            if crisp == argmax(fuzzy.truths(i)) {
                agree += 1;
            }
        }
    }
    Ok(agree as f64 / states.len() as f64)
}

/// Mean and (population) standard deviation of the last episodes' rewards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardSummary {
    pub mean: f64,
    pub std: f64,
    pub episodes: usize,
}

impl RewardSummary {
    pub fn of(rewards: &[f64]) -> Option<Self> {
        if rewards.is_empty() {
            return None;
        }
        let n = rewards.len() as f64;
        let mean = rewards.iter().sum::<f64>() / n;
        let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            episodes: rewards.len(),
        })
    }

    /// Summary of the last `window` entries.
    pub fn last(rewards: &[f64], window: usize) -> Option<Self> {
        Self::of(&rewards[rewards.len().saturating_sub(window)..])
    }
}

/// Human-readable policy report, one `action() :- body` line per disjunct.
pub fn format_policy(title: &str, actions: &[String], rules: &[ExtractedRule], stats: Option<RewardSummary>) -> String {
    let mut out = String::new();
    if !title.is_empty() {
        let _ = writeln!(out, "{title}");
    }
    match stats {
        Some(s) => {
            let _ = writeln!(out, "mean reward: {:.1} ± {:.1}", s.mean, s.std);
        }
        None => {
            let _ = writeln!(out, "mean reward: n/a");
        }
    }
    for (a, name) in actions.iter().enumerate() {
        let mine: Vec<&ExtractedRule> = rules.iter().filter(|r| r.action_index == a).collect();
        if mine.is_empty() {
            let _ = writeln!(out, "{name}() :- ⊥");
        }
        for r in mine {
            let _ = writeln!(out, "{name}() :- {}", r.body());
        }
    }
    out
}

/// One JSON record per rule.
pub fn write_rules_jsonl(rules: &[ExtractedRule], mut w: impl Write) -> Result<()> {
    for r in rules {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_rules_jsonl(text: &str) -> Result<Vec<ExtractedRule>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
