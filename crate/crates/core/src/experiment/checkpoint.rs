use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::EpisodeRecord;
use crate::error::{Error, Result};
use crate::predicates::FeatureSchema;
use crate::trainers::{Agent, Trainer};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Complete trainable state of one trial, including optimiser moments,
/// replay memory and random-generator positions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ExperimentConfig,
    /// Trial seed.
    pub seed: u64,
    pub schema: FeatureSchema,
    pub actions: Vec<String>,
    pub agent: Agent,
    pub records: Vec<EpisodeRecord>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    /// Loads and checks that the stored schema agrees with both the
    /// configuration and the stored policy.
    pub fn load(path: &Path) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Schema(format!(
                "checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        ck.check_schema(&ck.config.schema()?)?;
        if let Some(p) = ck.agent.policy() {
            ck.check_schema(p.schema())?;
            if p.actions() != ck.actions.as_slice() {
                return Err(Error::Schema("policy actions differ from checkpoint actions".into()));
            }
        }
        Ok(ck)
    }

    pub fn check_schema(&self, expected: &FeatureSchema) -> Result<()> {
        if &self.schema == expected {
            return Ok(());
        }
        let names = |s: &FeatureSchema| s.features().iter().map(|f| f.name.clone()).collect::<Vec<_>>();
        Err(Error::Schema(format!(
            "checkpoint features {:?} do not match expected {:?} (or their binning differs)",
            names(&self.schema),
            names(expected)
        )))
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.reward).collect()
    }
}
