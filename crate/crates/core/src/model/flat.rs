//! Flat BiLSTM baseline: trainable lookup over the flattened S·W token
//! sequence, one BiLSTM read to a document vector, same dense head.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::head::{Head, HeadCache};
use super::{ClassDistribution, ModelError};
use crate::corpus::{Geometry, SegmentGrid};
use crate::nncore::lstm::SequenceTape;
use crate::nncore::params::{join, ParamBlock};
use crate::nncore::{softmax, Activation, Initializer, LstmParams, Matrix, Params, Real};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Token vocabulary for the lookup table. Ids 0 and 1 are reserved for the
/// pad and unknown rows; real tokens follow in first-seen order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        Self::from_tokens(tokens)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    pub fn build<'a>(grids: impl IntoIterator<Item = &'a SegmentGrid>) -> Self {
        let mut v = Self { tokens: Vec::new(), index: HashMap::new() };
        for g in grids {
            for (_, tok) in g.real_tokens() {
                if !v.index.contains_key(tok) {
                    v.index.insert(tok.to_string(), v.tokens.len() + 2);
                    v.tokens.push(tok.to_string());
                }
            }
        }
        v
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i + 2)).collect();
        Self { tokens, index }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Rows in the lookup table, including the two reserved rows.
    pub fn table_rows(&self) -> usize {
        self.tokens.len() + 2
    }

    pub fn encode(&self, grid: &SegmentGrid) -> Vec<usize> {
        grid.slots()
            .iter()
            .enumerate()
            .map(|(slot, tok)| {
                if grid.is_pad(slot) {
                    PAD_ID
                } else {
                    self.index.get(tok).copied().unwrap_or(UNK_ID)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatBiLstmClassifier<T> {
    pub geometry: Geometry,
    /// `table_rows × dim`
    pub lookup: Matrix<T>,
    pub forward_lstm: LstmParams<T>,
    pub backward_lstm: LstmParams<T>,
    pub head: Head<T>,
}

#[derive(Debug, Clone)]
pub struct FlatTape<T> {
    ids: Vec<usize>,
    forward: SequenceTape<T>,
    backward: SequenceTape<T>,
    pub document: Vec<T>,
    head: HeadCache<T>,
    pub logits: Vec<T>,
    pub probs: Vec<T>,
}

impl<T: Real> FlatBiLstmClassifier<T> {
    pub fn init(
        init: &mut Initializer,
        geometry: Geometry,
        table_rows: usize,
        dim: usize,
        hidden: usize,
        dense_hidden: usize,
        activation: Activation,
    ) -> Self {
        Self {
            geometry,
            lookup: init.glorot(table_rows, dim, table_rows, dim),
            forward_lstm: init.lstm(dim, hidden),
            backward_lstm: init.lstm(dim, hidden),
            head: Head::init(init, 2 * hidden, dense_hidden, activation),
        }
    }

    pub fn dim(&self) -> usize {
        self.lookup.cols()
    }

    pub fn forward_with_tape(&self, ids: &[usize]) -> Result<FlatTape<T>, ModelError> {
        if ids.len() != self.geometry.slots() {
            return Err(ModelError::InputMismatch(format!(
                "token sequence has {} slots, model expects {}",
                ids.len(),
                self.geometry.slots()
            )));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= self.lookup.rows()) {
            return Err(ModelError::InputMismatch(format!(
                "token id {bad} outside lookup table of {} rows",
                self.lookup.rows()
            )));
        }
        let forward = SequenceTape::record_rows(ids.iter().map(|&i| self.lookup.row(i)), &self.forward_lstm);
        let backward = SequenceTape::record_rows(ids.iter().rev().map(|&i| self.lookup.row(i)), &self.backward_lstm);
        let mut document = forward.last_hidden().to_vec();
        document.extend_from_slice(backward.last_hidden());
        let (logits, head) = self.head.forward(&document)?;
        let probs = softmax(&logits)?;
        Ok(FlatTape { ids: ids.to_vec(), forward, backward, document, head, logits, probs })
    }

    pub fn forward(&self, ids: &[usize]) -> Result<ClassDistribution, ModelError> {
        ClassDistribution::from_probs(&self.forward_with_tape(ids)?.probs)
    }

    pub fn backward(&self, tape: &FlatTape<T>, dlogits: &[T], grads: &mut Self) {
        let d_doc = self.head.backward(&tape.head, dlogits, &mut grads.head);
        let (n, h) = (tape.ids.len(), self.forward_lstm.hidden_dim());
        let mut dh = Matrix::zeros(n, h);
        dh.row_mut(n - 1).copy_from_slice(&d_doc[..h]);
        let dx_f = tape.forward.backward(&self.forward_lstm, &dh, &mut grads.forward_lstm, true);
        dh.row_mut(n - 1).copy_from_slice(&d_doc[h..]);
        let dx_b = tape.backward.backward(&self.backward_lstm, &dh, &mut grads.backward_lstm, true);
        let (Some(dx_f), Some(dx_b)) = (dx_f, dx_b) else { return };
        for (t, &id) in tape.ids.iter().enumerate() {
            let row = grads.lookup.row_mut(id);
            for ((g, &a), &b) in row.iter_mut().zip(dx_f.row(t)).zip(dx_b.row(n - 1 - t)) {
                *g = *g + a + b;
            }
        }
    }
}

impl<T: Real> Params<T> for FlatBiLstmClassifier<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<ParamBlock<'a, T>>) {
        out.push(ParamBlock {
            name: join(prefix, "lookup"),
            dims: vec![self.lookup.rows(), self.lookup.cols()],
            data: self.lookup.data(),
        });
        self.forward_lstm.visit(&join(prefix, "bilstm_forward"), out);
        self.backward_lstm.visit(&join(prefix, "bilstm_backward"), out);
        self.head.visit(prefix, out);
    }

    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [T]>) {
        out.push(self.lookup.data_mut());
        self.forward_lstm.visit_mut(out);
        self.backward_lstm.visit_mut(out);
        self.head.visit_mut(out);
    }
}
