//! The three classifier versions.
//!
//! | version | input | encoder |
//! |---------|-------|---------|
//! | `ver_0` | token ids, trainable lookup | one BiLSTM over all S·W slots |
//! | `ver_1` | pad-before embeddings | word LSTM → sentence LSTM |
//! | `ver_2` | pad-after embeddings | word LSTM → sentence LSTM |
//!
//! All three end in `softmax(dense(act(dense(D))))` over eight categories.

mod flat;
mod head;
mod hierarchical;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Category, Geometry, SegmentGrid};
use crate::embedding::{EmbeddingMatrix, ProviderKind, ProviderSpec};
use crate::nncore::params::ParamBlock;
use crate::nncore::{
    cross_entropy_clipped, cross_entropy_grad_logits, grad_check, Activation, DenseParams, GradCheckOptions,
    GradCheckReport, Initializer, LstmParams, NnError, Params, Real, DEFAULT_CLIP_EPSILON,
};

pub use flat::{FlatBiLstmClassifier, FlatTape, Vocab, PAD_ID, UNK_ID};
pub use head::Head;
pub use hierarchical::{HierarchicalClassifier, HierarchicalTape};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("input does not match model: {0}")]
    InputMismatch(String),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("invalid class distribution: {0}")]
    Distribution(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelVersion {
    #[serde(rename = "ver_0")]
    Ver0,
    #[serde(rename = "ver_1")]
    Ver1,
    #[serde(rename = "ver_2")]
    Ver2,
}

impl ModelVersion {
    pub const ALL: [ModelVersion; 3] = [ModelVersion::Ver0, ModelVersion::Ver1, ModelVersion::Ver2];

    pub fn tag(self) -> &'static str {
        match self {
            ModelVersion::Ver0 => "ver_0",
            ModelVersion::Ver1 => "ver_1",
            ModelVersion::Ver2 => "ver_2",
        }
    }
}

impl fmt::Display for ModelVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ModelVersion {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|v| v.tag() == s).ok_or_else(|| ModelError::Config(format!("unknown version {s:?}")))
    }
}

/// Named document geometries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GeometryPreset {
    #[serde(rename = "DE_1")]
    De1,
    #[serde(rename = "DE_150")]
    De150,
    #[serde(rename = "DE_600")]
    De600,
    #[serde(rename = "DE_1000_A")]
    De1000A,
    #[serde(rename = "DE_1000_B")]
    De1000B,
}

impl GeometryPreset {
    pub const ALL: [GeometryPreset; 5] =
        [GeometryPreset::De1, GeometryPreset::De150, GeometryPreset::De600, GeometryPreset::De1000A, GeometryPreset::De1000B];

    pub fn geometry(self) -> Geometry {
        match self {
            GeometryPreset::De1 => Geometry::new(1, 1),
            GeometryPreset::De150 => Geometry::new(15, 10),
            GeometryPreset::De600 => Geometry::new(30, 20),
            GeometryPreset::De1000A => Geometry::new(100, 10),
            GeometryPreset::De1000B => Geometry::new(10, 100),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GeometryPreset::De1 => "DE_1",
            GeometryPreset::De150 => "DE_150",
            GeometryPreset::De600 => "DE_600",
            GeometryPreset::De1000A => "DE_1000_A",
            GeometryPreset::De1000B => "DE_1000_B",
        }
    }
}

/// A preset name (`"DE_600"`) or explicit `{"sentences": S, "words": W}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeometrySpec {
    Preset(GeometryPreset),
    Explicit(Geometry),
}

impl GeometrySpec {
    pub fn geometry(&self) -> Geometry {
        match self {
            GeometrySpec::Preset(p) => p.geometry(),
            GeometrySpec::Explicit(g) => *g,
        }
    }

    pub fn label(&self) -> String {
        match self {
            GeometrySpec::Preset(p) => p.name().to_string(),
            GeometrySpec::Explicit(g) => format!("DE_{}x{}", g.sentences, g.words),
        }
    }
}

impl Default for GeometrySpec {
    fn default() -> Self {
        GeometrySpec::Preset(GeometryPreset::De600)
    }
}

/// What the sentence LSTM reads per sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentenceInput {
    /// All W word hiddens concatenated (`W · hidden_word` wide).
    #[default]
    Concat,
    /// Only the last word hidden (`hidden_word` wide).
    Final,
}

impl SentenceInput {
    pub fn sentence_dim(self, words: usize, hidden_word: usize) -> usize {
        match self {
            SentenceInput::Concat => words * hidden_word,
            SentenceInput::Final => hidden_word,
        }
    }
}

fn d_hidden() -> usize {
    128
}
fn d_dense() -> usize {
    64
}
fn d_eps() -> f64 {
    DEFAULT_CLIP_EPSILON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub version: ModelVersion,
    #[serde(default)]
    pub geometry: GeometrySpec,
    /// Token embedding source (ver_1/ver_2) or lookup width (ver_0).
    #[serde(default)]
    pub embedding: ProviderSpec,
    /// Word-level LSTM width; also the BiLSTM width per direction for ver_0.
    #[serde(default = "d_hidden")]
    pub hidden_word: usize,
    #[serde(default = "d_hidden")]
    pub hidden_sentence: usize,
    #[serde(default = "d_dense")]
    pub dense_hidden: usize,
    #[serde(default)]
    pub dense_activation: Activation,
    #[serde(default)]
    pub sentence_input: SentenceInput,
    #[serde(default = "d_eps")]
    pub clip_epsilon: f64,
}

impl ModelConfig {
    pub fn new(version: ModelVersion) -> Self {
        Self {
            version,
            geometry: GeometrySpec::default(),
            embedding: ProviderSpec::default(),
            hidden_word: d_hidden(),
            hidden_sentence: d_hidden(),
            dense_hidden: d_dense(),
            dense_activation: Activation::Linear,
            sentence_input: SentenceInput::Concat,
            clip_epsilon: d_eps(),
        }
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry.geometry()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let g = self.geometry();
        if g.sentences == 0 || g.words == 0 {
            return Err(ModelError::Config("geometry needs at least one sentence and one word".into()));
        }
        if self.hidden_word == 0 || self.hidden_sentence == 0 || self.dense_hidden == 0 {
            return Err(ModelError::Config("hidden sizes must be positive".into()));
        }
        if self.dense_activation == Activation::Softmax {
            return Err(ModelError::Config("dense_activation must be linear or relu".into()));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 0.5) {
            return Err(ModelError::Config(format!("clip_epsilon {} outside (0, 0.5)", self.clip_epsilon)));
        }
        self.embedding.validate().map_err(|e| ModelError::Config(e.to_string()))?;
        match (self.version, self.embedding.kind) {
            (ModelVersion::Ver1 | ModelVersion::Ver2, ProviderKind::LookupTrainable) => Err(ModelError::Config(
                format!("{} needs an external embedding provider, not lookup-trainable", self.version),
            )),
            (ModelVersion::Ver1, ProviderKind::Precomputed) => Err(ModelError::Config(
                "ver_1 embeds pad markers, which precomputed files do not carry; use the hashed provider".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Closed-form trainable parameter count. `vocab_size` is the number of real
/// tokens in the ver_0 lookup (two reserved rows are added).
pub fn count_params(config: &ModelConfig, vocab_size: usize) -> usize {
    let g = config.geometry();
    let dim = config.embedding.dim;
    match config.version {
        ModelVersion::Ver0 => {
            (vocab_size + 2) * dim
                + 2 * LstmParams::<f32>::count(dim, config.hidden_word)
                + Head::<f32>::count(2 * config.hidden_word, config.dense_hidden)
        }
        ModelVersion::Ver1 | ModelVersion::Ver2 => {
            let sentence_dim = config.sentence_input.sentence_dim(g.words, config.hidden_word);
            LstmParams::<f32>::count(dim, config.hidden_word)
                + LstmParams::<f32>::count(sentence_dim, config.hidden_sentence)
                + Head::<f32>::count(config.hidden_sentence, config.dense_hidden)
        }
    }
}

/// Eight category probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution {
    probs: [f64; Category::COUNT],
}

impl ClassDistribution {
    /// Accepts finite, non-negative probabilities summing to 1 ± 1e-6.
    pub fn from_probs<T: Real>(probs: &[T]) -> Result<Self, ModelError> {
        if probs.len() != Category::COUNT {
            return Err(ModelError::Distribution(format!("expected 8 probabilities, got {}", probs.len())));
        }
        let mut out = [0.0; Category::COUNT];
        for (o, p) in out.iter_mut().zip(probs) {
            *o = p.as_f64();
        }
        if out.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(ModelError::Distribution("probabilities must be finite and non-negative".into()));
        }
        let sum: f64 = out.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(ModelError::Distribution(format!("probabilities sum to {sum}")));
        }
        Ok(Self { probs: out })
    }

    pub fn probs(&self) -> &[f64; Category::COUNT] {
        &self.probs
    }

    /// Highest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn category(&self) -> Category {
        Category::ALL[self.argmax()]
    }
}

pub fn predict(dist: &ClassDistribution) -> Category {
    dist.category()
}

/// Model input: a token-embedding matrix (ver_1/ver_2) or token ids (ver_0).
#[derive(Debug, Clone, PartialEq)]
pub enum ModelInput {
    Embedded(EmbeddingMatrix),
    Tokens(Vec<usize>),
}

/// Result of a forward/backward pass on one labeled sample.
#[derive(Debug, Clone)]
pub struct SampleOutcome<T> {
    pub loss: T,
    pub probs: Vec<T>,
}

impl<T: Real> SampleOutcome<T> {
    pub fn predicted(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier<T> {
    Hierarchical(HierarchicalClassifier<T>),
    Flat(FlatBiLstmClassifier<T>),
}

impl<T: Real> Classifier<T> {
    /// Fresh weights from `seed`. `vocab_rows` is the ver_0 lookup table
    /// height and ignored by the other versions.
    pub fn init(config: &ModelConfig, vocab_rows: usize, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut init = Initializer::new(seed);
        let g = config.geometry();
        Ok(match config.version {
            ModelVersion::Ver0 => Classifier::Flat(FlatBiLstmClassifier::init(
                &mut init,
                g,
                vocab_rows.max(2),
                config.embedding.dim,
                config.hidden_word,
                config.dense_hidden,
                config.dense_activation,
            )),
            ModelVersion::Ver1 | ModelVersion::Ver2 => Classifier::Hierarchical(HierarchicalClassifier::init(
                &mut init,
                g,
                config.embedding.dim,
                config.hidden_word,
                config.hidden_sentence,
                config.dense_hidden,
                config.dense_activation,
                config.sentence_input,
            )),
        })
    }

    fn logits_and_probs(&self, input: &ModelInput) -> Result<Vec<T>, ModelError> {
        match (self, input) {
            (Classifier::Hierarchical(m), ModelInput::Embedded(e)) => Ok(m.forward_with_tape(e)?.probs),
            (Classifier::Flat(m), ModelInput::Tokens(ids)) => Ok(m.forward_with_tape(ids)?.probs),
            _ => Err(ModelError::InputMismatch("input kind does not match model version".into())),
        }
    }

    pub fn probs(&self, input: &ModelInput) -> Result<Vec<T>, ModelError> {
        self.logits_and_probs(input)
    }

    pub fn forward(&self, input: &ModelInput) -> Result<ClassDistribution, ModelError> {
        ClassDistribution::from_probs(&self.logits_and_probs(input)?)
    }

    pub fn loss(&self, input: &ModelInput, target: Category, eps: f64) -> Result<SampleOutcome<T>, ModelError> {
        let probs = self.logits_and_probs(input)?;
        let loss = cross_entropy_clipped(&probs, target.index(), eps)?;
        Ok(SampleOutcome { loss, probs })
    }

    /// Forward plus exact backward for one sample; gradients of the
    /// per-sample loss accumulate into `grads`.
    pub fn loss_and_grad(
        &self,
        input: &ModelInput,
        target: Category,
        eps: f64,
        grads: &mut Self,
    ) -> Result<SampleOutcome<T>, ModelError> {
        match (self, input, grads) {
            (Classifier::Hierarchical(m), ModelInput::Embedded(e), Classifier::Hierarchical(g)) => {
                let tape = m.forward_with_tape(e)?;
                let loss = cross_entropy_clipped(&tape.probs, target.index(), eps)?;
                let dlogits = cross_entropy_grad_logits(&tape.probs, target.index(), eps)?;
                m.backward(&tape, &dlogits, g);
                Ok(SampleOutcome { loss, probs: tape.probs })
            }
            (Classifier::Flat(m), ModelInput::Tokens(ids), Classifier::Flat(g)) => {
                let tape = m.forward_with_tape(ids)?;
                let loss = cross_entropy_clipped(&tape.probs, target.index(), eps)?;
                let dlogits = cross_entropy_grad_logits(&tape.probs, target.index(), eps)?;
                m.backward(&tape, &dlogits, g);
                Ok(SampleOutcome { loss, probs: tape.probs })
            }
            _ => Err(ModelError::InputMismatch("input kind does not match model version".into())),
        }
    }

    pub fn geometry(&self) -> Geometry {
        match self {
            Classifier::Hierarchical(m) => m.geometry,
            Classifier::Flat(m) => m.geometry,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Classifier::Hierarchical(m) => m.dim(),
            Classifier::Flat(m) => m.dim(),
        }
    }

    fn final_dense_mut(&mut self) -> &mut DenseParams<T> {
        match self {
            Classifier::Hierarchical(m) => &mut m.head.dense2,
            Classifier::Flat(m) => &mut m.head.dense2,
        }
    }
}

impl<T: Real> Params<T> for Classifier<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<ParamBlock<'a, T>>) {
        match self {
            Classifier::Hierarchical(m) => m.visit(prefix, out),
            Classifier::Flat(m) => m.visit(prefix, out),
        }
    }

    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [T]>) {
        match self {
            Classifier::Hierarchical(m) => m.visit_mut(out),
            Classifier::Flat(m) => m.visit_mut(out),
        }
    }
}

/// Hierarchical forward over an embedding matrix.
pub fn hierarchical_forward<T: Real>(
    e: &EmbeddingMatrix,
    model: &HierarchicalClassifier<T>,
) -> Result<(ClassDistribution, HierarchicalTape<T>), ModelError> {
    let tape = model.forward_with_tape(e)?;
    Ok((ClassDistribution::from_probs(&tape.probs)?, tape))
}

/// Flat BiLSTM forward over a token grid; unknown tokens use the shared UNK row.
pub fn flat_bilstm_forward<T: Real>(
    grid: &SegmentGrid,
    vocab: &Vocab,
    model: &FlatBiLstmClassifier<T>,
) -> Result<ClassDistribution, ModelError> {
    model.forward(&vocab.encode(grid))
}

/// Finite-difference check of one sample's loss gradient at double precision.
/// `corrupt_final_dense` doubles the analytic output-layer gradient, which a
/// working check must flag.
pub fn check_gradients(
    model: &Classifier<f64>,
    input: &ModelInput,
    target: Category,
    eps: f64,
    opts: &GradCheckOptions,
    corrupt_final_dense: bool,
) -> Result<GradCheckReport, ModelError> {
    let mut grads = model.zeros_like();
    model.loss_and_grad(input, target, eps, &mut grads)?;
    if corrupt_final_dense {
        grads.final_dense_mut().scale(2.0);
    }
    Ok(grad_check(
        model,
        &grads,
        |m| m.loss(input, target, eps).map(|o| o.loss).unwrap_or(f64::NAN),
        opts,
    ))
}
