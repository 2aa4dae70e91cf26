use super::{DenseParams, LstmParams, Matrix, Real};
use crate::rng::SplitMix64;

/// Seeded Glorot-uniform initializer. Tensors are filled in the order they
/// are requested, so the same seed and call sequence reproduce the same bits.
#[derive(Debug, Clone)]
pub struct Initializer {
    rng: SplitMix64,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Self { rng: SplitMix64::new(seed) }
    }

    pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
        (6.0 / (fan_in + fan_out) as f64).sqrt()
    }

    pub fn glorot<T: Real>(&mut self, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Matrix<T> {
        let limit = Self::glorot_limit(fan_in, fan_out);
        let data = (0..rows * cols).map(|_| T::of(limit * self.rng.next_signed_unit())).collect();
        Matrix::from_vec(rows, cols, data)
    }

    /// Each gate block gets its own fan (`input → hidden`, `hidden → hidden`);
    /// biases are zero except the forget gate, which starts at 1.
    pub fn lstm<T: Real>(&mut self, input_dim: usize, hidden_dim: usize) -> LstmParams<T> {
        let w = self.glorot(4 * hidden_dim, input_dim, input_dim, hidden_dim);
        let u = self.glorot(4 * hidden_dim, hidden_dim, hidden_dim, hidden_dim);
        let mut b = vec![T::zero(); 4 * hidden_dim];
        b[hidden_dim..2 * hidden_dim].fill(T::one());
        LstmParams { w, u, b }
    }

    pub fn dense<T: Real>(&mut self, input_dim: usize, output_dim: usize) -> DenseParams<T> {
        DenseParams { w: self.glorot(output_dim, input_dim, input_dim, output_dim), b: vec![T::zero(); output_dim] }
    }
}
