//! Token grids to `(S·W, dim)` embedding matrices.
//!
//! Two padding strategies are supported. Pad-before embeds the literal pad
//! marker like any other token; pad-after embeds only real tokens and leaves
//! pad rows exactly zero. Precomputed per-token features are read from EMB1
//! files (see [`emb1`]).

pub mod emb1;
mod hashed;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Geometry, SegmentGrid, PAD_TOKEN};

pub use emb1::{load_precomputed, read_emb1, write_embeddings, Emb1File, Emb1Record};
pub use hashed::{hashed_embed, HashedProvider};

pub const DEFAULT_DIM: usize = 768;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("cannot embed an empty token")]
    EmptyToken,
    #[error("provider failed on token {token:?} at slot {slot}: {source}")]
    Provider {
        slot: usize,
        token: String,
        #[source]
        source: Box<EmbeddingError>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic {found:?}, expected {expected:?}")]
    BadMagic { path: PathBuf, expected: String, found: String },
    #[error("{path}: unsupported format version {version}")]
    UnsupportedVersion { path: PathBuf, version: u32 },
    #[error("{path}: truncated file ({context})")]
    Truncated { path: PathBuf, context: String },
    #[error("embedding dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("document {0:?} is missing from the embedding file")]
    MissingDocument(String),
    #[error("document {0:?} appears more than once in the embedding file")]
    DuplicateDocument(String),
    #[error("document {id:?}: file has {found} token rows but segmentation yields {expected}")]
    TokenCountMismatch { id: String, expected: usize, found: usize },
    #[error("record {id:?}: {values} values do not form {token_count} rows of dim {dim}")]
    InconsistentRecord { id: String, token_count: usize, dim: usize, values: usize },
    #[error("invalid provider spec: {0}")]
    InvalidSpec(String),
}

/// Source of per-token vectors.
pub trait EmbeddingProvider: Sync {
    fn dim(&self) -> usize;
    fn embed(&self, token: &str) -> Result<Vec<f32>, EmbeddingError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    Hashed,
    Precomputed,
    LookupTrainable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSpec {
    pub kind: ProviderKind,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_path: Option<PathBuf>,
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

impl Default for ProviderSpec {
    fn default() -> Self {
        Self { kind: ProviderKind::Hashed, dim: DEFAULT_DIM, source_path: None }
    }
}

impl ProviderSpec {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.dim == 0 {
            return Err(EmbeddingError::InvalidSpec("dim must be at least 1".into()));
        }
        if self.kind == ProviderKind::Precomputed && self.source_path.is_none() {
            return Err(EmbeddingError::InvalidSpec("precomputed provider requires source_path".into()));
        }
        Ok(())
    }
}

/// A `(S·W, dim)` matrix with a mask of which rows are real tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    geometry: Geometry,
    dim: usize,
    values: Vec<f32>,
    pad_mask: Vec<bool>,
}

impl EmbeddingMatrix {
    pub fn zeros(geometry: Geometry, dim: usize) -> Self {
        Self {
            geometry,
            dim,
            values: vec![0.0; geometry.slots() * dim],
            pad_mask: vec![false; geometry.slots()],
        }
    }

    /// Wraps raw row-major values; `pad_mask[i]` is true for real tokens.
    pub fn from_parts(
        geometry: Geometry,
        dim: usize,
        values: Vec<f32>,
        pad_mask: Vec<bool>,
    ) -> Result<Self, EmbeddingError> {
        let rows = geometry.slots();
        if pad_mask.len() != rows || values.len() != rows * dim {
            return Err(EmbeddingError::InconsistentRecord {
                id: String::new(),
                token_count: rows,
                dim,
                values: values.len(),
            });
        }
        Ok(Self { geometry, dim, values, pad_mask })
    }

    /// Places `rows` (row-major, one per real token in grid order) at the
    /// grid's real slots; pad slots stay zero.
    pub(crate) fn pad_after_from_rows(grid: &SegmentGrid, dim: usize, rows: &[f32]) -> Self {
        let mut m = Self::zeros(grid.geometry(), dim);
        for (k, (slot, _)) in grid.real_tokens().enumerate() {
            m.row_mut(slot).copy_from_slice(&rows[k * dim..(k + 1) * dim]);
            m.pad_mask[slot] = true;
        }
        m
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.pad_mask.len()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn pad_mask(&self) -> &[bool] {
        &self.pad_mask
    }

    pub fn real_rows(&self) -> usize {
        self.pad_mask.iter().filter(|&&m| m).count()
    }
}

fn embed_slot(provider: &dyn EmbeddingProvider, slot: usize, token: &str) -> Result<Vec<f32>, EmbeddingError> {
    let v = provider.embed(token).map_err(|e| EmbeddingError::Provider {
        slot,
        token: token.to_string(),
        source: Box::new(e),
    })?;
    if v.len() != provider.dim() {
        return Err(EmbeddingError::DimMismatch { expected: provider.dim(), found: v.len() });
    }
    Ok(v)
}

/// Pad-before: every slot, pad markers included, goes through the provider.
pub fn embed_pad_before(
    grid: &SegmentGrid,
    provider: &dyn EmbeddingProvider,
) -> Result<EmbeddingMatrix, EmbeddingError> {
    let dim = provider.dim();
    let mut m = EmbeddingMatrix::zeros(grid.geometry(), dim);
    let mut pad_row: Option<Vec<f32>> = None;
    for (slot, token) in grid.slots().iter().enumerate() {
        if grid.is_pad(slot) {
            if pad_row.is_none() {
                pad_row = Some(embed_slot(provider, slot, PAD_TOKEN)?);
            }
            m.row_mut(slot).copy_from_slice(pad_row.as_deref().unwrap_or_default());
        } else {
            let v = embed_slot(provider, slot, token)?;
            m.row_mut(slot).copy_from_slice(&v);
            m.pad_mask[slot] = true;
        }
    }
    Ok(m)
}

/// Pad-after: only real tokens are embedded; pad rows are exact zeros.
pub fn embed_pad_after(
    grid: &SegmentGrid,
    provider: &dyn EmbeddingProvider,
) -> Result<EmbeddingMatrix, EmbeddingError> {
    let dim = provider.dim();
    let mut m = EmbeddingMatrix::zeros(grid.geometry(), dim);
    for (slot, token) in grid.real_tokens() {
        let v = embed_slot(provider, slot, token)?;
        m.row_mut(slot).copy_from_slice(&v);
        m.pad_mask[slot] = true;
    }
    Ok(m)
}
