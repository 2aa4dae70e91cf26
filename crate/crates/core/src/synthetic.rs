//! Seeded synthetic news corpus.
//!
//! Every category owns a vocabulary of CJK characters. A fraction `overlap`
//! of each vocabulary is drawn from one pool shared by all categories; the
//! rest is private to the category. Documents are sentences of characters
//! drawn uniformly from their category's vocabulary, joined by `。`.

use serde::{Deserialize, Serialize};

use crate::corpus::{Category, Document};
use crate::rng::SplitMix64;

const FIRST_CHAR: u32 = 0x4E00;

fn d_docs() -> usize {
    50
}
fn d_vocab() -> usize {
    12
}
fn d_sentences() -> (usize, usize) {
    (4, 10)
}
fn d_words() -> (usize, usize) {
    (3, 8)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    #[serde(default = "d_docs")]
    pub docs_per_class: usize,
    #[serde(default = "d_vocab")]
    pub vocab_per_class: usize,
    /// Share of each class vocabulary taken from the common pool, in [0, 1].
    #[serde(default)]
    pub overlap: f64,
    /// Inclusive range of sentences per document.
    #[serde(default = "d_sentences")]
    pub sentences: (usize, usize),
    /// Inclusive range of characters per sentence.
    #[serde(default = "d_words")]
    pub words: (usize, usize),
    #[serde(default)]
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            docs_per_class: d_docs(),
            vocab_per_class: d_vocab(),
            overlap: 0.0,
            sentences: d_sentences(),
            words: d_words(),
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(format!("overlap {} outside [0, 1]", self.overlap));
        }
        if self.vocab_per_class == 0 {
            return Err("vocab_per_class must be positive".into());
        }
        for (name, (lo, hi)) in [("sentences", self.sentences), ("words", self.words)] {
            if lo == 0 || lo > hi {
                return Err(format!("{name} range ({lo}, {hi}) must satisfy 1 <= min <= max"));
            }
        }
        let chars = Category::COUNT * self.vocab_per_class;
        if chars > 0x5000 {
            return Err(format!("vocabulary of {chars} characters exceeds the CJK block"));
        }
        Ok(())
    }

    pub fn shared_count(&self) -> usize {
        (self.overlap * self.vocab_per_class as f64).round() as usize
    }

    /// Vocabulary of each category, shared pool first.
    pub fn vocabularies(&self) -> Vec<Vec<char>> {
        let shared = self.shared_count();
        let own = self.vocab_per_class - shared;
        let ch = |k: usize| char::from_u32(FIRST_CHAR + k as u32).expect("CJK code point");
        (0..Category::COUNT)
            .map(|c| {
                let mut v: Vec<char> = (0..shared).map(ch).collect();
                v.extend((0..own).map(|k| ch(shared + c * own + k)));
                v
            })
            .collect()
    }

    /// Documents in round-robin category order, ids `syn-<category>-<n>`.
    pub fn generate(&self) -> Result<Vec<Document>, String> {
        self.validate()?;
        let vocabs = self.vocabularies();
        let mut rng = SplitMix64::new(self.seed);
        let mut range = |(lo, hi): (usize, usize)| lo + rng.below((hi - lo + 1) as u64) as usize;
        let mut lengths = Vec::new();
        for _ in 0..self.docs_per_class * Category::COUNT {
            let s = range(self.sentences);
            lengths.push((0..s).map(|_| range(self.words)).collect::<Vec<_>>());
        }
        let mut docs = Vec::with_capacity(lengths.len());
        for (n, sentence_lengths) in lengths.into_iter().enumerate() {
            let (i, c) = (n / Category::COUNT, n % Category::COUNT);
            let vocab = &vocabs[c];
            let sentences: Vec<String> = sentence_lengths
                .iter()
                .map(|&w| (0..w).map(|_| vocab[rng.below(vocab.len() as u64) as usize]).collect())
                .collect();
            let category = Category::ALL[c];
            docs.push(Document::new(
                format!("syn-{}-{i}", category.name().to_lowercase()),
                sentences.join("。") + "。",
                Some(category),
            ));
        }
        Ok(docs)
    }
}
