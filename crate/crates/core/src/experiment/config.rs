use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envs::make_env;
use crate::error::{Error, Result};
use crate::policy::{DnlPolicy, PolicyConfig};
use crate::predicates::{Feature, FeatureKind, FeatureSchema, Transform, TransformKb, TransformSpec};
use crate::rules::{DEFAULT_CONFIDENT, DEFAULT_KEEP};
use crate::trainers::{
    A2cConfig, A2cTrainer, Agent, DqnConfig, DqnTrainer, ReinforceConfig, ReinforceTrainer, SacConfig, SacTrainer,
    TrainerKind,
};

/// Agent variant: boundary predicates only, or with non-linear transform predicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "dNLRLc", alias = "dnlrlc")]
    Continuous,
    #[serde(rename = "dNLRLnlc", alias = "dnlrlnlc")]
    NonLinear,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Continuous => "dNLRLc",
            Variant::NonLinear => "dNLRLnlc",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformEntry {
    pub feature: String,
    pub transform: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleConfig {
    pub keep: f64,
    pub confident: f64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            keep: DEFAULT_KEEP,
            confident: DEFAULT_CONFIDENT,
        }
    }
}

/// A full experiment description. Every field has a default, so a config
/// file only needs the values it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub environment: String,
    /// Overrides the environment's episode step cap.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    pub variant: Variant,
    pub trainer: TrainerKind,
    pub seed: u64,
    /// Independent trials; trial `t` uses seed `seed + t`.
    pub trials: usize,
    pub episodes: usize,
    /// Stop a trial once the trailing-window mean reaches this value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_at_mean: Option<f64>,
    /// Window for the reported mean ± std.
    pub summary_window: usize,
    pub output_dir: PathBuf,
    /// Bins per continuous feature (overrides the environment default).
    pub bins: BTreeMap<String, usize>,
    /// `[low, high]` binning range per continuous feature.
    pub ranges: BTreeMap<String, [f64; 2]>,
    pub transforms: Vec<TransformEntry>,
    pub policy: PolicyConfig,
    pub rules: RuleConfig,
    pub sac: SacConfig,
    pub reinforce: ReinforceConfig,
    pub dqn: DqnConfig,
    pub a2c: A2cConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            environment: "cartpole".into(),
            max_steps: None,
            variant: Variant::Continuous,
            trainer: TrainerKind::Sac,
            seed: 0,
            trials: 5,
            episodes: 3000,
            stop_at_mean: None,
            summary_window: 100,
            output_dir: PathBuf::from("runs"),
            bins: BTreeMap::new(),
            ranges: BTreeMap::new(),
            transforms: Vec::new(),
            policy: PolicyConfig::default(),
            rules: RuleConfig::default(),
            sac: SacConfig::default(),
            reinforce: ReinforceConfig::default(),
            dqn: DqnConfig::default(),
            a2c: A2cConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        match self.variant {
            Variant::Continuous if !self.transforms.is_empty() => {
                p.push("variant dNLRLc takes no transform registrations".into())
            }
            Variant::NonLinear if self.transforms.is_empty() => {
                p.push("variant dNLRLnlc needs at least one transform registration".into())
            }
            _ => {}
        }
        if self.trials == 0 {
            p.push("trials must be >= 1".into());
        }
        if self.summary_window == 0 {
            p.push("summary_window must be >= 1".into());
        }
        if self.max_steps == Some(0) {
            p.push("max_steps must be >= 1".into());
        }
        if self.policy.n_terms == 0 {
            p.push("policy.n_terms must be >= 1".into());
        }
        if !(self.policy.membership_c >= 1.0) {
            p.push("policy.membership_c must be >= 1".into());
        }
        if !(self.policy.boundary_c > 0.0) {
            p.push("policy.boundary_c must be > 0".into());
        }
        if !(self.policy.prob_floor > 0.0) {
            p.push("policy.prob_floor must be > 0".into());
        }
        if !(self.rules.keep > 0.0 && self.rules.keep <= self.rules.confident && self.rules.confident <= 1.0) {
            p.push("rules thresholds need 0 < keep <= confident <= 1".into());
        }
        p.extend(match self.trainer {
            TrainerKind::Sac => self.sac.validate(),
            TrainerKind::Reinforce => self.reinforce.validate(),
            TrainerKind::Dqn => self.dqn.validate(),
            TrainerKind::A2c => self.a2c.validate(),
        });
        match make_env(&self.environment, self.max_steps) {
            Ok(env) => {
                let schema = env.schema();
                for name in self.bins.keys().chain(self.ranges.keys()) {
                    match schema.index_of(name) {
                        None => p.push(format!("unknown feature '{name}'")),
                        Some(i) if schema.features()[i].is_discrete() => {
                            p.push(format!("feature '{name}' is discrete and takes no bins or range"))
                        }
                        _ => {}
                    }
                }
                for (name, &k) in &self.bins {
                    if k == 0 {
                        p.push(format!("bins for '{name}' must be >= 1"));
                    }
                }
                for (name, r) in &self.ranges {
                    if !(r[0] < r[1]) {
                        p.push(format!("range for '{name}' needs low < high"));
                    }
                }
                for t in &self.transforms {
                    if let Err(e) = t.transform.parse::<Transform>() {
                        p.push(e.to_string());
                    }
                    if schema.index_of(&t.feature).is_none() {
                        p.push(format!("transform on unknown feature '{}'", t.feature));
                    }
                }
                if p.is_empty() {
                    if let Err(e) = self.schema().and_then(|s| self.kb(&s)) {
                        p.push(e.to_string());
                    }
                }
            }
            Err(e) => p.push(e.to_string()),
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(p))
        }
    }

    /// The environment's schema with configured bins and ranges applied.
    pub fn schema(&self) -> Result<FeatureSchema> {
        let env = make_env(&self.environment, self.max_steps)?;
        let features = env
            .schema()
            .features()
            .iter()
            .map(|f| match f.kind {
                FeatureKind::Continuous { low, high, bins } => {
                    let [low, high] = self.ranges.get(&f.name).copied().unwrap_or([low, high]);
                    let bins = self.bins.get(&f.name).copied().unwrap_or(bins);
                    Feature::continuous(&f.name, low, high, bins)
                }
                FeatureKind::Discrete => f.clone(),
            })
            .collect();
        FeatureSchema::new(features)
    }

    pub fn kb(&self, schema: &FeatureSchema) -> Result<TransformKb> {
        let entries = self
            .transforms
            .iter()
            .map(|t| {
                Ok(TransformSpec {
                    feature: t.feature.clone(),
                    transform: t.transform.parse()?,
                    range: t.range.map(|[a, b]| (a, b)),
                    bins: t.bins,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        TransformKb::new(entries, schema)
    }

    pub fn build_policy(&self, seed: u64) -> Result<DnlPolicy> {
        let env = make_env(&self.environment, self.max_steps)?;
        let schema = self.schema()?;
        let kb = self.kb(&schema)?;
        DnlPolicy::new(schema, kb, env.action_names(), &self.policy, seed)
    }

    pub fn build_agent(&self, seed: u64) -> Result<Agent> {
        let policy = self.build_policy(seed)?;
        let trainer_seed = seed.wrapping_add(0x9e37_79b9);
        Ok(match self.trainer {
            TrainerKind::Sac => Agent::Sac(SacTrainer::new(policy, self.sac.clone(), trainer_seed)?),
            TrainerKind::Reinforce => {
                Agent::Reinforce(ReinforceTrainer::new(policy, self.reinforce.clone(), trainer_seed)?)
            }
            TrainerKind::Dqn => Agent::Dqn(DqnTrainer::new(policy, self.dqn.clone(), trainer_seed)?),
            TrainerKind::A2c => Agent::A2c(A2cTrainer::new(policy, self.a2c.clone(), trainer_seed)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.variant = Variant::NonLinear;
        cfg.transforms.push(TransformEntry {
            feature: "PoleAngle".into(),
            transform: "sine".into(),
            range: None,
            bins: None,
        });
        cfg.bins.insert("CartPos".into(), 3);
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn every_violation_is_listed() {
        let text = r#"
            variant = "dNLRLnlc"
            trials = 0
            [bins]
            Nope = 3
            [sac]
            tau = 0.0
        "#;
        match ExperimentConfig::from_toml(text) {
            Err(Error::InvalidConfig(p)) => {
                assert!(p.len() >= 4, "{p:?}");
                assert!(p.iter().any(|m| m.contains("dNLRLnlc")));
                assert!(p.iter().any(|m| m.contains("Nope")));
                assert!(p.iter().any(|m| m.contains("tau")));
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn continuous_variant_rejects_transforms() {
        let text = r#"
            [[transforms]]
            feature = "PoleAngle"
            transform = "sine"
        "#;
        assert!(matches!(ExperimentConfig::from_toml(text), Err(Error::InvalidConfig(_))));
    }
}
