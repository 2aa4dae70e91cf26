//! Run directory layout: `config.json`, `metrics.csv`, `run.json`,
//! `model.prm1` and, for ver_0, `vocab.json`.

use std::fs;
use std::path::{Path, PathBuf};

use hierdoc_core::config::{from_value, read_json, RunConfig};
use hierdoc_core::model::{Classifier, ModelVersion, Vocab};
use hierdoc_core::nncore::checkpoint::{read_checkpoint, write_checkpoint};
use hierdoc_core::trainer::{emit_metrics_csv, Experiment};

use crate::failure::{Failure, OrFail, EXIT_CONFIG, EXIT_DATA};

pub const CONFIG_FILE: &str = "config.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const RECORD_FILE: &str = "run.json";
pub const CHECKPOINT_FILE: &str = "model.prm1";
pub const VOCAB_FILE: &str = "vocab.json";

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).or_fail(format!("serializing {}", path.display()))?;
    text.push('\n');
    fs::write(path, text).or_fail(format!("writing {}", path.display()))
}

pub fn write_run(dir: &Path, exp: &Experiment) -> Result<(), Failure> {
    fs::create_dir_all(dir).or_fail(format!("creating {}", dir.display()))?;
    write_json(&dir.join(CONFIG_FILE), &exp.record.config)?;
    emit_metrics_csv(&exp.record, &dir.join(METRICS_FILE))?;
    write_json(&dir.join(RECORD_FILE), &exp.record)?;
    write_checkpoint(&dir.join(CHECKPOINT_FILE), &exp.model)?;
    if let Some(v) = &exp.vocab {
        write_json(&dir.join(VOCAB_FILE), v)?;
    }
    Ok(())
}

/// A trained model loaded back from disk.
pub struct LoadedRun {
    pub config: RunConfig,
    pub model: Classifier<f32>,
    pub vocab: Option<Vocab>,
}

/// Loads `checkpoint` with the `config.json` (and `vocab.json`) beside it.
pub fn load_run(checkpoint: &Path) -> Result<LoadedRun, Failure> {
    let dir: PathBuf = checkpoint.parent().map(Path::to_path_buf).unwrap_or_default();
    let config_path = dir.join(CONFIG_FILE);
    let mut config = from_value(read_json(&config_path)?, &config_path.display().to_string())?;
    config.resolve_paths(&dir);
    config.validate()?;
    let vocab = if config.model.version == ModelVersion::Ver0 {
        let path = dir.join(VOCAB_FILE);
        let text = fs::read_to_string(&path)
            .map_err(|e| Failure::msg(EXIT_DATA, format!("{}: {e}", path.display())))?;
        let v: Vocab = serde_json::from_str(&text)
            .map_err(|e| Failure::msg(EXIT_DATA, format!("{}: {e}", path.display())))?;
        Some(v)
    } else {
        None
    };
    let rows = vocab.as_ref().map_or(0, Vocab::table_rows);
    let mut model = Classifier::<f32>::init(&config.model, rows, 0).map_err(|e| Failure::new(EXIT_CONFIG, e))?;
    read_checkpoint(checkpoint, &mut model)?;
    Ok(LoadedRun { config, model, vocab })
}
