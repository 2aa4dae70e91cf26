use super::{EmbeddingError, EmbeddingProvider};
use crate::rng::{fnv1a64, SplitMix64};

/// Deterministic unit vector for a token: FNV-1a of its UTF-8 bytes seeds a
/// splitmix64 stream, `dim` draws in `[-1, 1)` are L2-normalized.
pub fn hashed_embed(token: &str, dim: usize) -> Result<Vec<f64>, EmbeddingError> {
    if token.is_empty() {
        return Err(EmbeddingError::EmptyToken);
    }
    let mut rng = SplitMix64::new(fnv1a64(token.as_bytes()));
    let mut v: Vec<f64> = (0..dim).map(|_| rng.next_signed_unit()).collect();
    let norm = v.iter().fold(0.0, |acc, x| acc + x * x).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    Ok(v)
}

/// Context-free hashed stand-in for a pretrained encoder.
#[derive(Debug, Clone, Copy)]
pub struct HashedProvider {
    dim: usize,
}

impl HashedProvider {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl EmbeddingProvider for HashedProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, token: &str) -> Result<Vec<f32>, EmbeddingError> {
        Ok(hashed_embed(token, self.dim)?.into_iter().map(|x| x as f32).collect())
    }
}
