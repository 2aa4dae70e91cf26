//! Run configuration shared by `train`, `sweep` and `gradcheck`.
//!
//! ```json
//! {
//!   "name": "ver2-de600",
//!   "corpus": {"synthetic": {"docs_per_class": 50}},
//!   "model": {"version": "ver_2", "geometry": "DE_600"},
//!   "train": {"epochs": 10, "batch_size": 10, "seed": 7}
//! }
//! ```
//!
//! Overrides use dotted keys (`train.batch_size=1`); the right-hand side is
//! parsed as JSON and falls back to a plain string.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::SplitSpec;
use crate::model::{ModelConfig, ModelError};
use crate::nncore::OptimizerConfig;
use crate::synthetic::SyntheticSpec;

pub const SEED_ENV: &str = "HIERDOC_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Parse {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("bad override {0:?}: expected key=value")]
    BadOverride(String),
    #[error("override {key:?}: {reason}")]
    OverridePath { key: String, reason: String },
    #[error("{SEED_ENV}={0:?} is not an unsigned 64-bit integer")]
    BadSeedEnv(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Where the documents come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum CorpusSource {
    /// JSONL file with `id`, `text`, `label` fields.
    Path(PathBuf),
    /// Generated in memory from a seed.
    Synthetic(SyntheticSpec),
}

impl Default for CorpusSource {
    fn default() -> Self {
        CorpusSource::Synthetic(SyntheticSpec::default())
    }
}

fn d_epochs() -> usize {
    10
}
fn d_batch() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub split: SplitSpec,
    /// Seeds weight initialization and the per-epoch shuffles.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: d_epochs(),
            batch_size: d_batch(),
            split: SplitSpec::default(),
            seed: 0,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.epochs == 0 {
            return Err(ConfigError::Invalid("train.epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(ConfigError::Invalid("train.batch_size must be at least 1".into()));
        }
        let o = &self.optimizer;
        if !(o.lr.is_finite() && o.lr > 0.0) {
            return Err(ConfigError::Invalid("train.optimizer.lr must be positive".into()));
        }
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) || o.epsilon <= 0.0 {
            return Err(ConfigError::Invalid("train.optimizer betas must lie in [0, 1) and epsilon be positive".into()));
        }
        if o.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return Err(ConfigError::Invalid("train.optimizer.clip_norm must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub corpus: CorpusSource,
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn new(model: ModelConfig) -> Self {
        Self { name: None, corpus: CorpusSource::default(), model, train: TrainConfig::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate()?;
        self.train.validate()?;
        if let Some(name) = &self.name {
            if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
                return Err(ConfigError::Invalid(format!("run name {name:?} is not a valid directory name")));
            }
        }
        Ok(())
    }

    /// Display name used for run directories.
    pub fn run_name(&self, index: usize) -> String {
        self.name.clone().unwrap_or_else(|| {
            format!("run{index:02}-{}-{}", self.model.version, self.model.geometry.label())
        })
    }

    /// Rewrites relative corpus and embedding paths against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let CorpusSource::Path(p) = &mut self.corpus {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = &mut self.model.embedding.source_path {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

pub fn read_json(path: &Path) -> Result<Value, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|source| ConfigError::Parse { context: path.display().to_string(), source })
}

/// Sets `key` (dot-separated) inside `root`, creating objects along the way.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| ConfigError::BadOverride(assignment.to_string()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::BadOverride(assignment.to_string()));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if !node.is_object() {
            if node.is_null() {
                *node = Value::Object(Default::default());
            } else {
                return Err(ConfigError::OverridePath {
                    key: key.to_string(),
                    reason: format!("{} is not an object", parts[..i].join(".")),
                });
            }
        }
        let map = node.as_object_mut().expect("object");
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("loop returns on last key part")
}

/// Reads `HIERDOC_SEED` if set.
pub fn seed_from_env() -> Result<Option<u64>, ConfigError> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s.trim().parse().map(Some).map_err(|_| ConfigError::BadSeedEnv(s)),
        Err(_) => Ok(None),
    }
}

pub fn from_value(value: Value, context: &str) -> Result<RunConfig, ConfigError> {
    serde_json::from_value(value).map_err(|source| ConfigError::Parse { context: context.to_string(), source })
}

/// Load, override, apply the seed variable, resolve relative paths, validate.
pub fn load_run_config(path: &Path, overrides: &[String], env_seed: Option<u64>) -> Result<RunConfig, ConfigError> {
    let mut value = read_json(path)?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let mut cfg = from_value(value, &path.display().to_string())?;
    if let Some(seed) = env_seed {
        cfg.train.seed = seed;
    }
    cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelVersion;
    use serde_json::json;

    #[test]
    fn overrides_set_nested_values() {
        let mut v = json!({"model": {"version": "ver_2"}, "train": {"batch_size": 10}});
        apply_override(&mut v, "train.batch_size=1").unwrap();
        apply_override(&mut v, "train.optimizer.kind=sgd").unwrap();
        apply_override(&mut v, "model.geometry={\"sentences\":2,\"words\":3}").unwrap();
        assert_eq!(v["train"]["batch_size"], json!(1));
        assert_eq!(v["train"]["optimizer"]["kind"], json!("sgd"));
        let cfg = from_value(v, "test").unwrap();
        assert_eq!(cfg.train.batch_size, 1);
        assert_eq!(cfg.model.geometry().slots(), 6);
    }

    #[test]
    fn bad_overrides() {
        let mut v = json!({"a": 1});
        assert!(apply_override(&mut v, "novalue").is_err());
        assert!(apply_override(&mut v, "a.b=2").is_err());
        assert!(apply_override(&mut v, ".x=2").is_err());
    }

    #[test]
    fn defaults_and_unknown_fields() {
        let cfg = from_value(json!({"model": {"version": "ver_1"}}), "t").unwrap();
        assert_eq!(cfg.train.epochs, 10);
        assert_eq!(cfg.train.batch_size, 10);
        assert_eq!(cfg.train.split.train_fraction.ratio_label(), "8:2");
        assert!(matches!(cfg.corpus, CorpusSource::Synthetic(_)));
        assert!(from_value(json!({"model": {"version": "ver_1"}, "trian": {}}), "t").is_err());
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig::new(ModelConfig::new(ModelVersion::Ver2));
        assert!(cfg.validate().is_ok());
        cfg.train.batch_size = 0;
        assert!(cfg.validate().is_err());
        cfg.train.batch_size = 1;
        cfg.name = Some("../x".into());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let mut cfg = RunConfig::new(ModelConfig::new(ModelVersion::Ver2));
        cfg.corpus = CorpusSource::Path("data/c.jsonl".into());
        cfg.resolve_paths(Path::new("/etc/runs"));
        assert_eq!(cfg.corpus, CorpusSource::Path("/etc/runs/data/c.jsonl".into()));
    }
}
