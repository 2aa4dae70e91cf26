//! Labeled news documents: JSONL ingestion, tokenization, S×W segmentation
//! and deterministic train/validation splits.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SplitMix64;

/// Reserved slot marker for padding. `tokenize` never emits it verbatim.
pub const PAD_TOKEN: &str = "[PAD]";
const ESCAPED_PAD_TOKEN: &str = "\\[PAD]";

/// Default sentence delimiters for news text.
pub const DEFAULT_DELIMITERS: &[char] = &['。', '！', '？', '!', '?', '.', ';', '；', '\n'];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed JSON: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("line {line}: unknown category {name:?}")]
    UnknownCategory { line: usize, name: String },
    #[error("line {line}: duplicate document id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: document id must be nonempty")]
    EmptyId { line: usize },
    #[error("document {id:?} has no category label")]
    Unlabeled { id: String },
    #[error("invalid train fraction {0:?}; expected a/b with 0 < a/b < 1 or a:b")]
    InvalidFraction(String),
}

/// The eight news categories, in canonical output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Technology,
    Entertainment,
    Fashion,
    Politics,
    Sports,
    International,
    Finance,
    Health,
}

impl Category {
    pub const COUNT: usize = 8;
    pub const ALL: [Category; 8] = [
        Category::Technology,
        Category::Entertainment,
        Category::Fashion,
        Category::Politics,
        Category::Sports,
        Category::International,
        Category::Finance,
        Category::Health,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Technology => "Technology",
            Category::Entertainment => "Entertainment",
            Category::Fashion => "Fashion",
            Category::Politics => "Politics",
            Category::Sports => "Sports",
            Category::International => "International",
            Category::Finance => "Finance",
            Category::Health => "Health",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.name() == name)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub label: Option<Category>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<Category>) -> Self {
        Self { id: id.into(), text: text.into(), label }
    }

    fn require_label(&self) -> Result<Category, CorpusError> {
        self.label.ok_or_else(|| CorpusError::Unlabeled { id: self.id.clone() })
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    id: String,
    text: String,
    #[serde(default)]
    category: Option<String>,
}

/// Reads a UTF-8 JSONL corpus, one `{"id", "text", "category"?}` object per line.
/// Blank lines are skipped.
pub fn load_jsonl(path: &Path) -> Result<Vec<Document>, CorpusError> {
    let io_err = |source| CorpusError::Io { path: path.to_path_buf(), source };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord = serde_json::from_str(&line)
            .map_err(|e| CorpusError::MalformedLine { line: line_no, message: e.to_string() })?;
        if rec.id.is_empty() {
            return Err(CorpusError::EmptyId { line: line_no });
        }
        let label = match rec.category {
            None => None,
            Some(name) => Some(
                Category::from_name(&name)
                    .ok_or(CorpusError::UnknownCategory { line: line_no, name })?,
            ),
        };
        if !seen.insert(rec.id.clone()) {
            return Err(CorpusError::DuplicateId { line: line_no, id: rec.id });
        }
        docs.push(Document { id: rec.id, text: rec.text, label });
    }
    Ok(docs)
}

/// CJK Unified Ideographs and Extension A.
pub fn is_cjk(c: char) -> bool {
    matches!(c, '\u{4E00}'..='\u{9FFF}' | '\u{3400}'..='\u{4DBF}')
}

/// Splits text into tokens: one token per CJK character, one per maximal run
/// of other non-whitespace characters. Whitespace is dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut run = String::new();
    let flush = |run: &mut String, tokens: &mut Vec<String>| {
        if !run.is_empty() {
            let tok = std::mem::take(run);
            tokens.push(if tok == PAD_TOKEN { ESCAPED_PAD_TOKEN.to_string() } else { tok });
        }
    };
    for c in text.chars() {
        if c.is_whitespace() {
            flush(&mut run, &mut tokens);
        } else if is_cjk(c) {
            flush(&mut run, &mut tokens);
            tokens.push(c.to_string());
        } else {
            run.push(c);
        }
    }
    flush(&mut run, &mut tokens);
    tokens
}

/// Document geometry: `sentences` rows of `words` token slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Geometry {
    pub sentences: usize,
    pub words: usize,
}

impl Geometry {
    pub const fn new(sentences: usize, words: usize) -> Self {
        Self { sentences, words }
    }

    pub fn slots(&self) -> usize {
        self.sentences * self.words
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.sentences, self.words)
    }
}

/// An S×W token grid. Pad slots hold [`PAD_TOKEN`] and only appear after the
/// real tokens of their row.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentGrid {
    geometry: Geometry,
    slots: Vec<String>,
    row_lengths: Vec<usize>,
}

impl SegmentGrid {
    /// Builds a grid from rows of real tokens, truncating rows to `W` and
    /// keeping at most `S` rows.
    pub fn from_rows(geometry: Geometry, rows: &[Vec<String>]) -> Self {
        let Geometry { sentences, words } = geometry;
        let mut slots = Vec::with_capacity(geometry.slots());
        let mut row_lengths = Vec::with_capacity(sentences);
        for r in 0..sentences {
            let row = rows.get(r).map(Vec::as_slice).unwrap_or(&[]);
            let len = row.len().min(words);
            slots.extend(row[..len].iter().cloned());
            slots.extend(std::iter::repeat_n(PAD_TOKEN.to_string(), words - len));
            row_lengths.push(len);
        }
        Self { geometry, slots, row_lengths }
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn row_lengths(&self) -> &[usize] {
        &self.row_lengths
    }

    pub fn row(&self, sentence: usize) -> &[String] {
        let w = self.geometry.words;
        &self.slots[sentence * w..(sentence + 1) * w]
    }

    /// All S·W slots in row-major order.
    pub fn slots(&self) -> &[String] {
        &self.slots
    }

    pub fn is_pad(&self, slot: usize) -> bool {
        let w = self.geometry.words;
        slot % w >= self.row_lengths[slot / w]
    }

    pub fn token_count(&self) -> usize {
        self.row_lengths.iter().sum()
    }

    /// Real (non-pad) tokens in row-major order.
    pub fn real_tokens(&self) -> impl Iterator<Item = (usize, &str)> + '_ {
        self.slots.iter().enumerate().filter(|(i, _)| !self.is_pad(*i)).map(|(i, t)| (i, t.as_str()))
    }
}

/// Sentence splitting plus tokenization into a fixed geometry.
#[derive(Debug, Clone)]
pub struct Segmenter {
    pub geometry: Geometry,
    pub delimiters: Vec<char>,
}

impl Segmenter {
    pub fn new(geometry: Geometry) -> Self {
        Self { geometry, delimiters: DEFAULT_DELIMITERS.to_vec() }
    }

    pub fn with_delimiters(geometry: Geometry, delimiters: &[char]) -> Self {
        Self { geometry, delimiters: delimiters.to_vec() }
    }

    /// Tokenized sentences before truncation. Sentences with no tokens are skipped.
    pub fn sentences(&self, text: &str) -> Vec<Vec<String>> {
        text.split(|c| self.delimiters.contains(&c))
            .map(tokenize)
            .filter(|toks| !toks.is_empty())
            .collect()
    }

    pub fn segment(&self, doc: &Document) -> SegmentGrid {
        self.segment_text(&doc.text)
    }

    pub fn segment_text(&self, text: &str) -> SegmentGrid {
        SegmentGrid::from_rows(self.geometry, &self.sentences(text))
    }
}

pub fn segment(doc: &Document, geometry: Geometry, delimiters: &[char]) -> SegmentGrid {
    Segmenter::with_delimiters(geometry, delimiters).segment(doc)
}

/// A train fraction `numerator / denominator` strictly between 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainFraction {
    numerator: u64,
    denominator: u64,
}

impl TrainFraction {
    pub fn new(numerator: u64, denominator: u64) -> Result<Self, CorpusError> {
        if numerator == 0 || numerator >= denominator {
            return Err(CorpusError::InvalidFraction(format!("{numerator}/{denominator}")));
        }
        Ok(Self { numerator, denominator })
    }

    /// `ceil(fraction · n)`.
    pub fn train_count(&self, n: usize) -> usize {
        let n = n as u64;
        (n * self.numerator).div_ceil(self.denominator) as usize
    }

    pub fn as_f64(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    /// Table-style ratio, e.g. `8:2`.
    pub fn ratio_label(&self) -> String {
        format!("{}:{}", self.numerator, self.denominator - self.numerator)
    }
}

impl Default for TrainFraction {
    fn default() -> Self {
        Self { numerator: 8, denominator: 10 }
    }
}

impl FromStr for TrainFraction {
    type Err = CorpusError;

    /// Accepts `a/b` (fraction) or `a:b` (train:valid ratio).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CorpusError::InvalidFraction(s.to_string());
        let parse = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
        if let Some((a, b)) = s.split_once('/') {
            Self::new(parse(a)?, parse(b)?)
        } else if let Some((a, b)) = s.split_once(':') {
            let (a, b) = (parse(a)?, parse(b)?);
            Self::new(a, a.checked_add(b).ok_or_else(bad)?)
        } else {
            Err(bad())
        }
    }
}

impl fmt::Display for TrainFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

impl Serialize for TrainFraction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TrainFraction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    #[serde(default)]
    pub train_fraction: TrainFraction,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: TrainFraction::default(), seed: 0 }
    }
}

/// Seeded shuffle, then the first `ceil(fraction · n)` documents train.
pub fn split_train_valid(
    docs: &[Document],
    spec: &SplitSpec,
) -> Result<(Vec<Document>, Vec<Document>), CorpusError> {
    for d in docs {
        d.require_label()?;
    }
    let mut order: Vec<usize> = (0..docs.len()).collect();
    SplitMix64::new(spec.seed).shuffle(&mut order);
    let cut = spec.train_fraction.train_count(docs.len());
    let pick = |idx: &[usize]| idx.iter().map(|&i| docs[i].clone()).collect::<Vec<_>>();
    Ok((pick(&order[..cut]), pick(&order[cut..])))
}

pub fn class_histogram(docs: &[Document]) -> Result<[usize; Category::COUNT], CorpusError> {
    let mut counts = [0; Category::COUNT];
    for d in docs {
        counts[d.require_label()?.index()] += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn write_corpus(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn category_order_is_canonical() {
        assert_eq!(Category::Technology.index(), 0);
        assert_eq!(Category::International.index(), 5);
        assert_eq!(Category::Health.index(), 7);
        for (i, c) in Category::ALL.iter().enumerate() {
            assert_eq!(Category::from_index(i), Some(*c));
            assert_eq!(Category::from_name(c.name()), Some(*c));
        }
        assert_eq!(Category::from_index(8), None);
    }

    #[test]
    fn load_jsonl_maps_categories() {
        let f = write_corpus(
            "{\"id\":\"n1\",\"text\":\"台積電\",\"category\":\"Technology\"}\n\n{\"id\":\"n2\",\"text\":\"\"}\n",
        );
        let docs = load_jsonl(f.path()).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].label, Some(Category::Technology));
        assert_eq!(docs[1].label, None);
    }

    #[test]
    fn load_jsonl_empty_file() {
        let f = write_corpus("");
        assert!(load_jsonl(f.path()).unwrap().is_empty());
    }

    #[test]
    fn load_jsonl_errors() {
        let f = write_corpus("{\"id\":\"a\",\"text\":\"x\",\"category\":\"Weather\"}\n");
        let err = load_jsonl(f.path()).unwrap_err();
        assert!(err.to_string().contains("unknown category"), "{err}");

        let f = write_corpus("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"b\",\"text\":\"y\"}\n{oops\n");
        let err = load_jsonl(f.path()).unwrap_err();
        assert!(matches!(err, CorpusError::MalformedLine { line: 3, .. }));
        assert!(err.to_string().contains("line 3"));

        let f = write_corpus("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n");
        assert!(matches!(load_jsonl(f.path()).unwrap_err(), CorpusError::DuplicateId { line: 2, .. }));
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("台灣 ok"), toks(&["台", "灣", "ok"]));
        assert_eq!(tokenize(""), Vec::<String>::new());
        assert_eq!(tokenize("abc def"), toks(&["abc", "def"]));
        assert_eq!(tokenize("GPU台積電x"), toks(&["GPU", "台", "積", "電", "x"]));
    }

    #[test]
    fn tokenize_escapes_literal_pad() {
        assert_eq!(tokenize("a [PAD] b"), toks(&["a", "\\[PAD]", "b"]));
        assert_eq!(tokenize("x[PAD]"), toks(&["x[PAD]"]));
    }

    #[test]
    fn segment_pads_and_truncates() {
        let doc = Document::new("d", "一二三四五。六七八九十。", None);
        let g = segment(&doc, Geometry::new(30, 20), DEFAULT_DELIMITERS);
        let mut expected = vec![5, 5];
        expected.resize(30, 0);
        assert_eq!(g.row_lengths(), expected.as_slice());
        assert_eq!(g.slots().len(), 600);
        assert_eq!(g.row(0)[4], "五");
        assert_eq!(g.row(0)[5], PAD_TOKEN);

        let text: String = (0..40).map(|i| format!("s{i}.")).collect();
        let g = segment(&Document::new("d", text, None), Geometry::new(30, 20), DEFAULT_DELIMITERS);
        assert_eq!(g.row_lengths(), &[1; 30]);
        assert_eq!(g.row(29)[0], "s29");

        let g = segment(&Document::new("d", "", None), Geometry::new(1, 1), DEFAULT_DELIMITERS);
        assert_eq!(g.slots(), &[PAD_TOKEN.to_string()]);
        assert_eq!(g.row_lengths(), &[0]);
    }

    #[test]
    fn segment_truncates_long_sentence() {
        let g = Segmenter::new(Geometry::new(2, 3)).segment_text("a b c d e");
        assert_eq!(g.row_lengths(), &[3, 0]);
        assert_eq!(g.row(0), toks(&["a", "b", "c"]).as_slice());
        assert!(g.is_pad(3) && g.is_pad(5));
    }

    #[test]
    fn train_fraction_parsing() {
        assert_eq!("8:2".parse::<TrainFraction>().unwrap(), TrainFraction::new(8, 10).unwrap());
        assert_eq!("4/5".parse::<TrainFraction>().unwrap().train_count(10), 8);
        assert!("1/1".parse::<TrainFraction>().is_err());
        assert!("0:5".parse::<TrainFraction>().is_err());
        assert!("half".parse::<TrainFraction>().is_err());
        assert_eq!(TrainFraction::default().ratio_label(), "8:2");
        assert_eq!(TrainFraction::default().train_count(201), 161);
    }

    fn labeled(n: usize) -> Vec<Document> {
        (0..n).map(|i| Document::new(format!("d{i}"), "x", Category::from_index(i % 8))).collect()
    }

    #[test]
    fn split_examples() {
        let spec = SplitSpec { train_fraction: TrainFraction::default(), seed: 3 };
        let (train, valid) = split_train_valid(&labeled(10), &spec).unwrap();
        assert_eq!((train.len(), valid.len()), (8, 2));
        let again = split_train_valid(&labeled(10), &spec).unwrap();
        assert_eq!(train, again.0);
        assert_eq!(valid, again.1);

        let (t, v) = split_train_valid(&[], &spec).unwrap();
        assert!(t.is_empty() && v.is_empty());

        let mut docs = labeled(3);
        docs[1].label = None;
        assert!(matches!(split_train_valid(&docs, &spec), Err(CorpusError::Unlabeled { .. })));
    }

    #[test]
    fn split_uses_reference_shuffle() {
        let spec = SplitSpec { train_fraction: TrainFraction::default(), seed: 42 };
        let (train, valid) = split_train_valid(&labeled(10), &spec).unwrap();
        let ids: Vec<_> = train.iter().chain(&valid).map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["d0", "d9", "d5", "d8", "d6", "d4", "d7", "d2", "d1", "d3"]);
    }

    #[test]
    fn histogram_examples() {
        assert_eq!(class_histogram(&[]).unwrap(), [0; 8]);
        let docs: Vec<_> =
            (0..3).map(|i| Document::new(format!("h{i}"), "", Some(Category::Health))).collect();
        assert_eq!(class_histogram(&docs).unwrap(), [0, 0, 0, 0, 0, 0, 0, 3]);

        let sizes = [6888, 2265, 5012, 2495, 1974, 1368, 2324, 6032];
        let mut big = Vec::new();
        for (c, &n) in sizes.iter().enumerate() {
            big.extend((0..n).map(|i| Document::new(format!("{c}-{i}"), "", Category::from_index(c))));
        }
        let h = class_histogram(&big).unwrap();
        assert_eq!(h, sizes);
        assert_eq!(h.iter().sum::<usize>(), 28358);
    }
}
