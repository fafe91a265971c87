//! Run configuration: ingestion/cleaning settings and analysis defaults,
//! loadable from JSON so whole runs are reproducible from config files.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::SchemaMapping;
use crate::{Error, Result};

fn default_threshold() -> f64 {
    0.5
}

fn default_dedup_key() -> Vec<String> {
    ["applicant_id", "model_id", "position_id"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// Ingestion and cleaning settings for one data source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Source column → canonical column mapping.
    pub schema: SchemaMapping,
    /// Recommendation threshold applied when binarizing scores.
    pub threshold: f64,
    /// Columns identifying a duplicate application.
    pub dedup_key: Vec<String>,
    /// Columns identifying one person across applicant ids; empty
    /// disables identity grouping.
    pub identity_key: Vec<String>,
    /// Models whose rows are internal test traffic.
    pub test_model_ids: BTreeSet<String>,
    /// Employer alias → canonical employer id.
    pub employer_merge_map: BTreeMap<String, String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schema: SchemaMapping::default(),
            threshold: default_threshold(),
            dedup_key: default_dedup_key(),
            identity_key: Vec::new(),
            test_model_ids: BTreeSet::new(),
            employer_merge_map: BTreeMap::new(),
        }
    }
}

impl PipelineConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
        let config: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| Error::json(&display, e))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold must lie strictly inside (0, 1), got {}",
                self.threshold
            )));
        }
        if self.dedup_key.is_empty() {
            return Err(Error::InvalidConfig(
                "dedup_key must name at least one column".into(),
            ));
        }
        Ok(())
    }
}

/// Analysis defaults shared by the audit, homogenization, and simulation
/// commands. Every field maps to a CLI flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Significance level for z-tests, BH correction, and GOF tests.
    pub alpha: f64,
    /// Practical-significance bound on the impact ratio.
    pub four_fifths: f64,
    /// Distinct-applicant floor for a position to enter the audit.
    pub min_reporting: u64,
    /// Demographic column audited for adverse impact.
    pub group_column: String,
    /// Restrict the audit to these groups (empty = all).
    pub groups: Vec<String>,
    /// Minimum expected count per χ² bin before merging.
    pub min_expected: f64,
    /// Minimum cohort size for a per-k row in the rejection curve.
    pub cohort_floor: u64,
    /// Replicates per k in the counterfactual simulation.
    pub replicates: u64,
    /// Master seed for the simulation.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha: 0.05,
            four_fifths: 0.8,
            min_reporting: 30,
            group_column: "race".into(),
            groups: Vec::new(),
            min_expected: 5.0,
            cohort_floor: 50,
            replicates: 100,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie strictly inside (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.four_fifths > 0.0 && self.four_fifths <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "four_fifths must lie in (0, 1], got {}",
                self.four_fifths
            )));
        }
        if self.min_expected <= 0.0 {
            return Err(Error::InvalidConfig(
                "min_expected must be positive".into(),
            ));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidConfig(
                "replicates must be at least 1".into(),
            ));
        }
        Ok(())
    }
}
