//! Word LSTM → sentence LSTM → dense head over a precomputed embedding matrix.
//!
//! For sentence `k` the word LSTM reads embedding rows `k·W .. k·W+W-1` and
//! produces hiddens `H_{kW} .. H_{kW+W-1}`; the sentence vector `V_k` is their
//! concatenation (or just the last one under [`SentenceInput::Final`]). The
//! sentence LSTM reads `V_0 .. V_{S-1}` and its final hidden is the document
//! vector fed to the head.

use super::head::{Head, HeadCache};
use super::{ClassDistribution, ModelError, SentenceInput};
use crate::corpus::Geometry;
use crate::embedding::EmbeddingMatrix;
use crate::nncore::lstm::SequenceTape;
use crate::nncore::params::{join, ParamBlock};
use crate::nncore::{softmax, Activation, Initializer, LstmParams, Matrix, Params, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalClassifier<T> {
    pub geometry: Geometry,
    pub sentence_input: SentenceInput,
    pub word: LstmParams<T>,
    pub sentence: LstmParams<T>,
    pub head: Head<T>,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct HierarchicalTape<T> {
    pub word: Vec<SequenceTape<T>>,
    /// `S × sentence_dim`
    pub sentence_vectors: Matrix<T>,
    pub sentence: SequenceTape<T>,
    pub document: Vec<T>,
    head: HeadCache<T>,
    pub logits: Vec<T>,
    pub probs: Vec<T>,
}

impl<T: Real> HierarchicalClassifier<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        init: &mut Initializer,
        geometry: Geometry,
        dim: usize,
        hidden_word: usize,
        hidden_sentence: usize,
        dense_hidden: usize,
        activation: Activation,
        sentence_input: SentenceInput,
    ) -> Self {
        let sentence_dim = sentence_input.sentence_dim(geometry.words, hidden_word);
        Self {
            geometry,
            sentence_input,
            word: init.lstm(dim, hidden_word),
            sentence: init.lstm(sentence_dim, hidden_sentence),
            head: Head::init(init, hidden_sentence, dense_hidden, activation),
        }
    }

    pub fn dim(&self) -> usize {
        self.word.input_dim()
    }

    fn sentence_vector(&self, tape: &SequenceTape<T>) -> Vec<T> {
        match self.sentence_input {
            SentenceInput::Concat => tape.hidden.data().to_vec(),
            SentenceInput::Final => tape.last_hidden().to_vec(),
        }
    }

    pub fn forward_with_tape(&self, e: &EmbeddingMatrix) -> Result<HierarchicalTape<T>, ModelError> {
        if e.geometry() != self.geometry || e.dim() != self.dim() {
            return Err(ModelError::InputMismatch(format!(
                "embedding matrix is {} dim {}, model expects {} dim {}",
                e.geometry(),
                e.dim(),
                self.geometry,
                self.dim()
            )));
        }
        if e.values().iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InputMismatch("embedding matrix contains non-finite values".into()));
        }
        let (w, dim) = (self.geometry.words, self.dim());
        let mut word = Vec::with_capacity(self.geometry.sentences);
        let mut vectors = Vec::new();
        let mut buf: Vec<T> = vec![T::zero(); w * dim];
        for k in 0..self.geometry.sentences {
            let rows = &e.values()[k * w * dim..(k + 1) * w * dim];
            for (b, &v) in buf.iter_mut().zip(rows) {
                *b = T::from_f32(v);
            }
            let tape = SequenceTape::record_rows(buf.chunks_exact(dim), &self.word);
            vectors.extend(self.sentence_vector(&tape));
            word.push(tape);
        }
        let sentence_dim = self.sentence.input_dim();
        let sentence_vectors = Matrix::from_vec(self.geometry.sentences, sentence_dim, vectors);
        let sentence = SequenceTape::record_rows(sentence_vectors.data().chunks_exact(sentence_dim), &self.sentence);
        let document = sentence.last_hidden().to_vec();
        let (logits, head) = self.head.forward(&document)?;
        let probs = softmax(&logits)?;
        Ok(HierarchicalTape { word, sentence_vectors, sentence, document, head, logits, probs })
    }

    pub fn forward(&self, e: &EmbeddingMatrix) -> Result<ClassDistribution, ModelError> {
        ClassDistribution::from_probs(&self.forward_with_tape(e)?.probs)
    }

    /// Accumulates parameter gradients for `∂L/∂logits = dlogits`.
    pub fn backward(&self, tape: &HierarchicalTape<T>, dlogits: &[T], grads: &mut Self) {
        let d_doc = self.head.backward(&tape.head, dlogits, &mut grads.head);
        let (s, hs) = (self.geometry.sentences, self.sentence.hidden_dim());
        let mut dh = Matrix::zeros(s, hs);
        dh.row_mut(s - 1).copy_from_slice(&d_doc);
        let Some(dv) = tape.sentence.backward(&self.sentence, &dh, &mut grads.sentence, true) else {
            return;
        };
        let (w, hw) = (self.geometry.words, self.word.hidden_dim());
        for (k, word_tape) in tape.word.iter().enumerate() {
            let dh_words = match self.sentence_input {
                SentenceInput::Concat => Matrix::from_vec(w, hw, dv.row(k).to_vec()),
                SentenceInput::Final => {
                    let mut m = Matrix::zeros(w, hw);
                    m.row_mut(w - 1).copy_from_slice(dv.row(k));
                    m
                }
            };
            word_tape.backward(&self.word, &dh_words, &mut grads.word, false);
        }
    }
}

impl<T: Real> Params<T> for HierarchicalClassifier<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<ParamBlock<'a, T>>) {
        self.word.visit(&join(prefix, "word_lstm"), out);
        self.sentence.visit(&join(prefix, "sentence_lstm"), out);
        self.head.visit(prefix, out);
    }

    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [T]>) {
        self.word.visit_mut(out);
        self.sentence.visit_mut(out);
        self.head.visit_mut(out);
    }
}
