//! The run configuration: one JSON document that determines every artifact.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusConfig, ReasoningParams, RephraseSchedule, WikiQuota};
use crate::error::{Error, Result};
use crate::io::{json_bytes, read_json};
use crate::persona::PoolSizes;
use crate::schedule::VariantSpec;

fn default_population() -> usize {
    3000
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paths {
    /// Directory with replacement name lists; bundled lists when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<PathBuf>,
    /// Directory with replacement sentence templates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
    /// Wiki-format JSONL to ingest as the external test set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wiki: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_population")]
    pub population: usize,
    #[serde(default)]
    pub pool_sizes: PoolSizes,
    #[serde(default)]
    pub schedule: RephraseSchedule,
    #[serde(default)]
    pub reasoning: ReasoningParams,
    #[serde(default)]
    pub wiki_quota: WikiQuota,
    #[serde(default)]
    pub variants: Vec<VariantSpec>,
    #[serde(default)]
    pub paths: Paths,
}

impl RunConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            population: default_population(),
            pool_sizes: PoolSizes::default(),
            schedule: RephraseSchedule::default(),
            reasoning: ReasoningParams::default(),
            wiki_quota: WikiQuota::default(),
            variants: Vec::new(),
            paths: Paths::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn corpus_config(&self) -> CorpusConfig {
        CorpusConfig {
            schedule: self.schedule.clone(),
            reasoning: self.reasoning,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.pool_sizes;
        if s.known + s.test + s.unknown != self.population {
            return Err(Error::SizeMismatch(format!(
                "pool sizes {}+{}+{} do not add up to population {}",
                s.known, s.test, s.unknown, self.population
            )));
        }
        self.schedule.validate()?;
        let mut names = std::collections::HashSet::new();
        for v in &self.variants {
            v.validate()?;
            if !names.insert(v.name.as_str()) {
                return Err(Error::InvalidSpec(format!("variant name `{}` used twice", v.name)));
            }
            if v.name.is_empty() || v.name.contains(['/', '\\']) || v.name.starts_with('.') {
                return Err(Error::InvalidSpec(format!("variant name `{}` is not a valid file stem", v.name)));
            }
        }
        Ok(())
    }

    /// Pretty JSON with keys in sorted order and a trailing newline.
    pub fn canonical_json(&self) -> Vec<u8> {
        let value = serde_json::to_value(self).expect("config serializes");
        json_bytes(&value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_round_trip() {
        let cfg = RunConfig::new(7);
        let bytes = cfg.canonical_json();
        let back: RunConfig = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.canonical_json(), bytes);
        let text = String::from_utf8(bytes).unwrap();
        let pos = |k: &str| text.find(&format!("\"{k}\"")).unwrap();
        assert!(pos("paths") < pos("population") && pos("population") < pos("seed"));
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(cfg.population, 3000);
        assert_eq!(cfg.schedule, RephraseSchedule::default());
        cfg.validate().unwrap();
        assert!(serde_json::from_str::<RunConfig>(r#"{"seed": 3, "bogus": 1}"#).is_err());
    }

    #[test]
    fn pool_mismatch_rejected() {
        let mut cfg = RunConfig::new(1);
        cfg.population = 10;
        assert!(matches!(cfg.validate(), Err(Error::SizeMismatch(_))));
    }
}
