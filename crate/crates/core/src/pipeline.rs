//! Experiment configuration shared by every command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::FilterCriteria;
use crate::error::{Error, Result};
use crate::learn::{
    DeployConfig, EvalConfig, FeatureOracleConfig, HitConfig, ImitationConfig, PpoConfig, ShadowPolicyConfig,
    SyntheticTaskConfig,
};
use crate::simenv::{ParamRanges, SimConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    /// Motion files forming the training corpus.
    pub motions: Vec<PathBuf>,
    /// Humanoid description; the built-in model when absent.
    pub model: Option<PathBuf>,
    /// Retargeting map; the built-in map when absent.
    pub retarget_map: Option<PathBuf>,
    /// Target stream for evaluation and deployment; standing when absent.
    pub targets: Option<PathBuf>,
    /// Demonstration files for imitation; synthetic when empty.
    pub demos: Vec<PathBuf>,
    pub checkpoints: PathBuf,
    pub logs: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            motions: Vec::new(),
            model: None,
            retarget_map: None,
            targets: None,
            demos: Vec::new(),
            checkpoints: "runs/checkpoints".into(),
            logs: "runs/logs".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeedsConfig {
    pub train: u64,
    pub eval: u64,
}

impl Default for SeedsConfig {
    fn default() -> Self {
        SeedsConfig { train: 0, eval: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShadowTrainingConfig {
    pub iterations: u64,
    pub workers: usize,
    /// Episode length in policy steps; whole streams when absent.
    pub segment: Option<usize>,
    /// Frames in the standing stream used when no motions are configured.
    pub standing_frames: usize,
    pub checkpoint_every: u64,
}

impl Default for ShadowTrainingConfig {
    fn default() -> Self {
        ShadowTrainingConfig {
            iterations: 60,
            workers: 1,
            segment: Some(150),
            standing_frames: 1000,
            checkpoint_every: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImitationDataConfig {
    pub train_demos: usize,
    pub validation_demos: usize,
    pub task: SyntheticTaskConfig,
}

impl Default for ImitationDataConfig {
    fn default() -> Self {
        ImitationDataConfig {
            train_demos: 12,
            validation_demos: 32,
            task: SyntheticTaskConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub seeds: SeedsConfig,
    pub filter: FilterCriteria,
    pub sim: SimConfig,
    pub ranges: ParamRanges,
    pub shadow: ShadowPolicyConfig,
    pub ppo: PpoConfig,
    pub train: ShadowTrainingConfig,
    pub hit: HitConfig,
    pub imitation: ImitationConfig,
    pub imitation_data: ImitationDataConfig,
    pub features: FeatureOracleConfig,
    pub eval: EvalConfig,
    pub deploy: DeployConfig,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            offset: e.span().map_or(0, |s| s.start as u64),
            message: e.message().to_string(),
        })
    }

    /// Reads a TOML file and applies `key=value` overrides, where the key is
    /// a dotted path such as `ppo.epochs` and the value a TOML literal or a
    /// bare string.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
            offset: e.span().map_or(0, |s| s.start as u64),
            message: e.message().to_string(),
        })?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Hex SHA-256 of the canonical JSON form, so formatting and omitted
    /// defaults do not change the hash.
    pub fn config_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Every referenced input file must exist.
    pub fn validate(&self) -> Result<()> {
        let p = &self.paths;
        let inputs = p.motions.iter().chain(&p.demos).chain(&p.model).chain(&p.retarget_map).chain(&p.targets);
        for path in inputs {
            if !path.is_file() {
                return Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "file not found")));
            }
        }
        self.sim.validate()?;
        self.ppo.validate()?;
        self.shadow.validate()?;
        self.hit.validate()?;
        self.filter.validate()
    }
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::InvalidArgument(format!("override `{assignment}` is not key=value")))?;
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut node = table;
    for part in parents {
        node = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::InvalidArgument(format!("override `{key}`: `{part}` is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}
