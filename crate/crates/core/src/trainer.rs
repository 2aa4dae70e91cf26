//! Training protocol: 8:2 split, seeded per-epoch shuffles, mean-loss batches,
//! per-epoch train/validation metrics and their CSV curves.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, CorpusSource, RunConfig};
use crate::corpus::{load_jsonl, split_train_valid, Category, CorpusError, Document, SegmentGrid, Segmenter, PAD_TOKEN};
use crate::embedding::{
    embed_pad_after, embed_pad_before, load_precomputed, EmbeddingError, EmbeddingMatrix, EmbeddingProvider,
    HashedProvider, ProviderKind,
};
use crate::model::{Classifier, ModelConfig, ModelError, ModelInput, ModelVersion, Vocab};
use crate::nncore::{NnError, Optimizer, Params};
use crate::rng::{derive_seed, SplitMix64};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error("embedding: {0}")]
    Embedding(#[from] EmbeddingError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("optimizer: {0}")]
    Nn(#[from] NnError),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{which} split is empty ({total} documents in corpus)")]
    EmptySplit { which: &'static str, total: usize },
    #[error("cannot {0} an empty document set")]
    EmptySet(&'static str),
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// A segmented, labeled document.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGrid {
    pub id: String,
    pub grid: SegmentGrid,
    pub label: Category,
}

pub fn segment_labeled(docs: &[Document], segmenter: &Segmenter) -> Result<Vec<LabeledGrid>, TrainError> {
    docs.par_iter()
        .map(|d| {
            let label = d.label.ok_or_else(|| CorpusError::Unlabeled { id: d.id.clone() })?;
            Ok(LabeledGrid { id: d.id.clone(), grid: segmenter.segment(d), label })
        })
        .collect()
}

/// Hashed provider with a warm table of known tokens.
#[derive(Debug, Clone)]
pub struct TokenCache {
    provider: HashedProvider,
    table: HashMap<String, Vec<f32>>,
}

impl TokenCache {
    pub fn new(dim: usize) -> Self {
        Self { provider: HashedProvider::new(dim), table: HashMap::new() }
    }

    pub fn warm<'a>(&mut self, tokens: impl IntoIterator<Item = &'a str>) -> Result<(), EmbeddingError> {
        let missing: BTreeSet<&str> = tokens.into_iter().filter(|t| !self.table.contains_key(*t)).collect();
        let fresh: Vec<(String, Vec<f32>)> = missing
            .into_par_iter()
            .map(|t| Ok((t.to_string(), self.provider.embed(t)?)))
            .collect::<Result<_, EmbeddingError>>()?;
        self.table.extend(fresh);
        Ok(())
    }
}

impl EmbeddingProvider for TokenCache {
    fn dim(&self) -> usize {
        self.provider.dim()
    }

    fn embed(&self, token: &str) -> Result<Vec<f32>, EmbeddingError> {
        match self.table.get(token) {
            Some(v) => Ok(v.clone()),
            None => self.provider.embed(token),
        }
    }
}

/// Turns segmented documents into model inputs for one model version.
#[derive(Debug, Clone)]
pub enum InputBuilder {
    Lookup(Vocab),
    Hashed { cache: TokenCache, pad_before: bool },
    Precomputed(HashMap<String, EmbeddingMatrix>),
}

impl InputBuilder {
    /// `train` fixes the ver_0 vocabulary; `all` is every document that will
    /// be embedded (needed to validate precomputed files).
    pub fn for_training(
        config: &ModelConfig,
        segmenter: &Segmenter,
        train: &[LabeledGrid],
        all_docs: &[Document],
        all_grids: &[LabeledGrid],
    ) -> Result<Self, TrainError> {
        if config.version == ModelVersion::Ver0 {
            return Ok(InputBuilder::Lookup(Vocab::build(train.iter().map(|s| &s.grid))));
        }
        Self::external(config, segmenter, all_docs, all_grids.iter().map(|s| &s.grid))
    }

    /// Builder for a trained model; `vocab` is required for ver_0.
    pub fn for_inference<'a>(
        config: &ModelConfig,
        segmenter: &Segmenter,
        vocab: Option<Vocab>,
        docs: &[Document],
        grids: impl IntoIterator<Item = &'a SegmentGrid>,
    ) -> Result<Self, TrainError> {
        if config.version == ModelVersion::Ver0 {
            let vocab = vocab.ok_or_else(|| ModelError::Config("ver_0 needs its training vocabulary".into()))?;
            return Ok(InputBuilder::Lookup(vocab));
        }
        Self::external(config, segmenter, docs, grids)
    }

    fn external<'a>(
        config: &ModelConfig,
        segmenter: &Segmenter,
        docs: &[Document],
        grids: impl IntoIterator<Item = &'a SegmentGrid>,
    ) -> Result<Self, TrainError> {
        let dim = config.embedding.dim;
        match config.embedding.kind {
            ProviderKind::Hashed => {
                let pad_before = config.version == ModelVersion::Ver1;
                let mut cache = TokenCache::new(dim);
                let grids: Vec<&SegmentGrid> = grids.into_iter().collect();
                cache.warm(grids.iter().flat_map(|g| g.real_tokens().map(|(_, t)| t)))?;
                if pad_before {
                    cache.warm([PAD_TOKEN])?;
                }
                Ok(InputBuilder::Hashed { cache, pad_before })
            }
            ProviderKind::Precomputed => {
                let path = config.embedding.source_path.as_deref().ok_or_else(|| {
                    ModelError::Config("precomputed provider requires embedding.source_path".into())
                })?;
                Ok(InputBuilder::Precomputed(load_precomputed(path, docs, segmenter, dim)?))
            }
            ProviderKind::LookupTrainable => {
                Err(ModelError::Config(format!("{} cannot use a lookup-trainable provider", config.version)).into())
            }
        }
    }

    pub fn vocab(&self) -> Option<&Vocab> {
        match self {
            InputBuilder::Lookup(v) => Some(v),
            _ => None,
        }
    }

    /// Rows the ver_0 lookup table needs.
    pub fn table_rows(&self) -> usize {
        self.vocab().map_or(0, Vocab::table_rows)
    }

    pub fn build(&self, id: &str, grid: &SegmentGrid) -> Result<ModelInput, TrainError> {
        Ok(match self {
            InputBuilder::Lookup(v) => ModelInput::Tokens(v.encode(grid)),
            InputBuilder::Hashed { cache, pad_before: true } => ModelInput::Embedded(embed_pad_before(grid, cache)?),
            InputBuilder::Hashed { cache, pad_before: false } => ModelInput::Embedded(embed_pad_after(grid, cache)?),
            InputBuilder::Precomputed(map) => ModelInput::Embedded(
                map.get(id).cloned().ok_or_else(|| EmbeddingError::MissingDocument(id.to_string()))?,
            ),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// Fraction of samples predicted correctly while the epoch was running.
    pub accuracy: f64,
    pub mean_loss: f64,
    pub steps: usize,
}

/// One pass over `samples` in an order shuffled by `shuffle_seed`, with one
/// optimizer step per batch on the batch-mean loss gradient.
#[allow(clippy::too_many_arguments)]
pub fn train_epoch(
    model: &mut Classifier<f32>,
    optimizer: &mut Optimizer<f32>,
    samples: &[LabeledGrid],
    builder: &InputBuilder,
    batch_size: usize,
    shuffle_seed: u64,
    clip_epsilon: f64,
) -> Result<EpochStats, TrainError> {
    if samples.is_empty() {
        return Err(TrainError::EmptySet("train on"));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    SplitMix64::new(shuffle_seed).shuffle(&mut order);
    let (mut correct, mut loss_sum, mut steps) = (0usize, 0.0f64, 0usize);
    for batch in order.chunks(batch_size.max(1)) {
        let current = &*model;
        let results: Vec<(bool, f64, Classifier<f32>)> = batch
            .par_iter()
            .map(|&i| {
                let s = &samples[i];
                let input = builder.build(&s.id, &s.grid)?;
                let mut grads = current.zeros_like();
                let out = current.loss_and_grad(&input, s.label, clip_epsilon, &mut grads)?;
                Ok((out.predicted() == s.label.index(), f64::from(out.loss), grads))
            })
            .collect::<Result<_, TrainError>>()?;
        let mut total: Option<Classifier<f32>> = None;
        for (hit, loss, grads) in results {
            correct += usize::from(hit);
            loss_sum += loss;
            match &mut total {
                Some(t) => t.add_assign(&grads),
                None => total = Some(grads),
            }
        }
        let mut total = total.expect("non-empty batch");
        total.scale(1.0 / batch.len() as f32);
        optimizer.step(model, &total)?;
        steps += 1;
    }
    let n = samples.len() as f64;
    Ok(EpochStats { accuracy: correct as f64 / n, mean_loss: loss_sum / n, steps })
}

/// Accuracy and mean clipped cross-entropy; parameters are only read.
pub fn evaluate(
    model: &Classifier<f32>,
    samples: &[LabeledGrid],
    builder: &InputBuilder,
    clip_epsilon: f64,
) -> Result<(f64, f64), TrainError> {
    if samples.is_empty() {
        return Err(TrainError::EmptySet("evaluate"));
    }
    let per: Vec<(bool, f64)> = samples
        .par_iter()
        .map(|s| {
            let input = builder.build(&s.id, &s.grid)?;
            let out = model.loss(&input, s.label, clip_epsilon)?;
            Ok((out.predicted() == s.label.index(), f64::from(out.loss)))
        })
        .collect::<Result<_, TrainError>>()?;
    let correct = per.iter().filter(|p| p.0).count();
    let loss: f64 = per.iter().map(|p| p.1).sum();
    let n = samples.len() as f64;
    Ok((correct as f64 / n, loss / n))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub train_acc: f64,
    pub train_loss: f64,
    pub val_acc: f64,
    pub val_loss: f64,
    pub optimizer_steps: usize,
    /// Seconds; kept out of serialized records so they stay reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

impl PartialEq for EpochMetrics {
    fn eq(&self, o: &Self) -> bool {
        (self.epoch, self.train_acc, self.train_loss, self.val_acc, self.val_loss, self.optimizer_steps)
            == (o.epoch, o.train_acc, o.train_loss, o.val_acc, o.val_loss, o.optimizer_steps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub corpus_fingerprint: String,
    pub corpus_size: usize,
    pub train_size: usize,
    pub valid_size: usize,
    pub metrics: Vec<EpochMetrics>,
    pub final_metrics: EpochMetrics,
}

/// SHA-256 over ids, texts and labels in corpus order.
pub fn corpus_fingerprint(docs: &[Document]) -> String {
    let mut h = Sha256::new();
    for d in docs {
        h.update(d.id.as_bytes());
        h.update([0]);
        h.update(d.text.as_bytes());
        h.update([0]);
        h.update(d.label.map_or("", |c| c.name()).as_bytes());
        h.update([b'\n']);
    }
    let digest = h.finalize();
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

pub fn load_corpus(source: &CorpusSource) -> Result<Vec<Document>, TrainError> {
    match source {
        CorpusSource::Path(p) => Ok(load_jsonl(p)?),
        CorpusSource::Synthetic(spec) => {
            spec.generate().map_err(|e| TrainError::Config(ConfigError::Invalid(format!("corpus.synthetic: {e}"))))
        }
    }
}

/// A finished run: metrics plus the trained weights.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub record: RunRecord,
    pub model: Classifier<f32>,
    pub vocab: Option<Vocab>,
}

pub fn run_experiment(config: &RunConfig) -> Result<Experiment, TrainError> {
    let docs = load_corpus(&config.corpus)?;
    run_on_documents(config, &docs)
}

/// Segment, embed, split, train for `epochs` and record metrics each epoch.
pub fn run_on_documents(config: &RunConfig, docs: &[Document]) -> Result<Experiment, TrainError> {
    config.validate()?;
    let (train_docs, valid_docs) = split_train_valid(docs, &config.train.split)?;
    if train_docs.is_empty() {
        return Err(TrainError::EmptySplit { which: "train", total: docs.len() });
    }
    if valid_docs.is_empty() {
        return Err(TrainError::EmptySplit { which: "validation", total: docs.len() });
    }
    let segmenter = Segmenter::new(config.model.geometry());
    let train = segment_labeled(&train_docs, &segmenter)?;
    let valid = segment_labeled(&valid_docs, &segmenter)?;
    let all: Vec<LabeledGrid> = train.iter().chain(&valid).cloned().collect();
    let builder = InputBuilder::for_training(&config.model, &segmenter, &train, docs, &all)?;

    let tc = &config.train;
    let eps = config.model.clip_epsilon;
    let mut model = Classifier::<f32>::init(&config.model, builder.table_rows(), tc.seed)?;
    let mut optimizer = Optimizer::new(tc.optimizer.clone());
    let mut metrics = Vec::with_capacity(tc.epochs);
    log::info!(
        "{}: {} train / {} validation documents, {} parameters",
        config.model.version,
        train.len(),
        valid.len(),
        model.num_params()
    );
    for epoch in 1..=tc.epochs {
        let start = Instant::now();
        let stats =
            train_epoch(&mut model, &mut optimizer, &train, &builder, tc.batch_size, derive_seed(tc.seed, epoch as u64), eps)?;
        let (val_acc, val_loss) = evaluate(&model, &valid, &builder, eps)?;
        let m = EpochMetrics {
            epoch,
            train_acc: stats.accuracy,
            train_loss: stats.mean_loss,
            val_acc,
            val_loss,
            optimizer_steps: stats.steps,
            wall_time: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}/{}: {} optimizer steps, acc {:.4} loss {:.6} val_acc {:.4} val_loss {:.6} ({:.2}s)",
            tc.epochs,
            m.optimizer_steps,
            m.train_acc,
            m.train_loss,
            m.val_acc,
            m.val_loss,
            m.wall_time
        );
        metrics.push(m);
    }
    let final_metrics = metrics.last().cloned().expect("epochs >= 1");
    let record = RunRecord {
        config: config.clone(),
        corpus_fingerprint: corpus_fingerprint(docs),
        corpus_size: docs.len(),
        train_size: train.len(),
        valid_size: valid.len(),
        metrics,
        final_metrics,
    };
    let vocab = builder.vocab().cloned();
    Ok(Experiment { record, model, vocab })
}

/// `%g`-style formatting with `sig` significant digits.
pub fn format_sig(v: f64, sig: usize) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= sig as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        trim(&format!("{:.*}", (sig as i32 - 1 - exp) as usize, v))
    }
}

pub const METRICS_HEADER: [&str; 5] = ["epoch", "train_acc", "train_loss", "val_acc", "val_loss"];

pub fn emit_metrics_csv(record: &RunRecord, path: &Path) -> Result<(), TrainError> {
    let csv_err = |source| TrainError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(METRICS_HEADER).map_err(csv_err)?;
    for m in &record.metrics {
        w.write_record([
            m.epoch.to_string(),
            format_sig(m.train_acc, 6),
            format_sig(m.train_loss, 6),
            format_sig(m.val_acc, 6),
            format_sig(m.val_loss, 6),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| csv_err(e.into()))
}

pub const COMPARISON_HEADER: [&str; 9] =
    ["version", "corpus_size", "split", "epoch", "batch", "acc", "val_acc", "loss", "val_loss"];

/// Final-epoch summary of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub version: ModelVersion,
    pub corpus_size: usize,
    pub split: String,
    pub epochs: usize,
    pub batch: usize,
    pub acc: f64,
    pub val_acc: f64,
    pub loss: f64,
    pub val_loss: f64,
}

impl ComparisonRow {
    pub fn from_record(r: &RunRecord) -> Self {
        let f = &r.final_metrics;
        Self {
            version: r.config.model.version,
            corpus_size: r.corpus_size,
            split: r.config.train.split.train_fraction.ratio_label(),
            epochs: r.metrics.len(),
            batch: r.config.train.batch_size,
            acc: f.train_acc,
            val_acc: f.val_acc,
            loss: f.train_loss,
            val_loss: f.val_loss,
        }
    }
}

pub fn write_comparison_csv(rows: &[ComparisonRow], path: &Path) -> Result<(), TrainError> {
    let csv_err = |source| TrainError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(COMPARISON_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.version.to_string(),
            r.corpus_size.to_string(),
            r.split.clone(),
            r.epochs.to_string(),
            r.batch.to_string(),
            format_sig(r.acc, 6),
            format_sig(r.val_acc, 6),
            format_sig(r.loss, 6),
            format_sig(r.val_loss, 6),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| csv_err(e.into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Geometry;
    use crate::model::GeometrySpec;
    use crate::synthetic::SyntheticSpec;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(1.1920929e-7, 6), "1.19209e-07");
        assert_eq!(format_sig(16.11809565, 6), "16.1181");
        assert_eq!(format_sig(1.0, 6), "1");
        assert_eq!(format_sig(0.125, 6), "0.125");
        assert_eq!(format_sig(2.0794415416798357, 6), "2.07944");
        assert_eq!(format_sig(0.000123456789, 6), "0.000123457");
        assert_eq!(format_sig(1234567.0, 6), "1.23457e+06");
        assert_eq!(format_sig(999999.5, 6), "1e+06");
        assert_eq!(format_sig(0.0, 6), "0");
    }

    fn small_config(version: ModelVersion) -> RunConfig {
        let mut model = ModelConfig::new(version);
        model.geometry = GeometrySpec::Explicit(Geometry::new(3, 4));
        model.embedding.dim = 8;
        model.hidden_word = 6;
        model.hidden_sentence = 6;
        model.dense_hidden = 8;
        let mut cfg = RunConfig::new(model);
        cfg.corpus = CorpusSource::Synthetic(SyntheticSpec {
            docs_per_class: 5,
            vocab_per_class: 6,
            sentences: (1, 3),
            words: (1, 4),
            ..Default::default()
        });
        cfg.train.epochs = 2;
        cfg.train.optimizer.lr = 0.01;
        cfg
    }

    #[test]
    fn steps_follow_batch_size() {
        for (batch, steps) in [(10, 4), (1, 32), (7, 5)] {
            let mut cfg = small_config(ModelVersion::Ver2);
            cfg.train.batch_size = batch;
            let exp = run_experiment(&cfg).unwrap();
            assert_eq!(exp.record.train_size, 32);
            assert_eq!(exp.record.valid_size, 8);
            assert!(exp.record.metrics.iter().all(|m| m.optimizer_steps == steps));
        }
    }

    #[test]
    fn runs_are_deterministic() {
        for version in ModelVersion::ALL {
            let cfg = small_config(version);
            let a = run_experiment(&cfg).unwrap();
            let b = run_experiment(&cfg).unwrap();
            assert_eq!(a.record, b.record);
            assert_eq!(a.model, b.model);
            assert_eq!(a.record.metrics.len(), 2);
            assert_eq!(a.vocab.is_some(), version == ModelVersion::Ver0);
        }
    }

    #[test]
    fn evaluate_is_pure_and_bounded() {
        let cfg = small_config(ModelVersion::Ver1);
        let exp = run_experiment(&cfg).unwrap();
        let docs = load_corpus(&cfg.corpus).unwrap();
        let seg = Segmenter::new(cfg.model.geometry());
        let grids = segment_labeled(&docs, &seg).unwrap();
        let builder =
            InputBuilder::for_inference(&cfg.model, &seg, None, &docs, grids.iter().map(|g| &g.grid)).unwrap();
        let before = exp.model.clone();
        let a = evaluate(&exp.model, &grids, &builder, 1e-7).unwrap();
        let b = evaluate(&exp.model, &grids, &builder, 1e-7).unwrap();
        assert_eq!(a, b);
        assert_eq!(before, exp.model);
        assert!((0.0..=1.0).contains(&a.0));
        assert!(a.1 >= 0.0 && a.1 <= 16.1181);
        assert!(evaluate(&exp.model, &[], &builder, 1e-7).is_err());
    }

    #[test]
    fn empty_splits_are_errors() {
        let cfg = small_config(ModelVersion::Ver2);
        let one = vec![Document::new("a", "台", Some(Category::Health))];
        assert!(matches!(run_on_documents(&cfg, &one), Err(TrainError::EmptySplit { which: "validation", .. })));
        assert!(matches!(run_on_documents(&cfg, &[]), Err(TrainError::EmptySplit { which: "train", .. })));
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = vec![Document::new("a", "台", Some(Category::Health))];
        let b = vec![Document::new("a", "台", Some(Category::Sports))];
        assert_ne!(corpus_fingerprint(&a), corpus_fingerprint(&b));
        assert_eq!(corpus_fingerprint(&a), corpus_fingerprint(&a.clone()));
        assert!(corpus_fingerprint(&[]).starts_with("sha256:e3b0c442"));
    }
}
