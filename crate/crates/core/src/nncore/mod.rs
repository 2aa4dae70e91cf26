//! Minimal numerical engine: LSTM/BiLSTM with backpropagation through time,
//! dense layers, clipped softmax cross-entropy, SGD/Adam, seeded Glorot
//! initialization, finite-difference gradient checking and PRM1 checkpoints.
//!
//! Everything is generic over [`Real`] so training can run at `f32` while
//! gradient checks run at `f64`.

pub mod checkpoint;
pub mod dense;
pub mod gradcheck;
pub mod init;
pub mod loss;
pub mod lstm;
pub mod optim;
pub(crate) mod params;
mod real;

use thiserror::Error;

pub use dense::{dense_backward, dense_forward, Activation, DenseParams};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use init::Initializer;
pub use loss::{cross_entropy_clipped, cross_entropy_grad_logits, softmax, DEFAULT_CLIP_EPSILON};
pub use lstm::{
    bilstm_sequence_forward, lstm_cell_forward, lstm_sequence_backward, lstm_sequence_forward, LstmParams,
    SequenceMode, SequenceOutput, SequenceTape, StepCache,
};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use params::{Matrix, ParamBlock, Params};
pub use real::Real;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch { context: &'static str, expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("empty sequence")]
    EmptySequence,
    #[error("clip epsilon must lie in (0, 0.5), got {0}")]
    InvalidEpsilon(f64),
    #[error("target index {0} out of range for {1} classes")]
    TargetOutOfRange(usize, usize),
    #[error("{0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<(), NnError> {
    if expected != found {
        return Err(NnError::ShapeMismatch { context, expected, found });
    }
    Ok(())
}

pub(crate) fn check_finite<T: Real>(context: &'static str, values: &[T]) -> Result<(), NnError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NnError::NonFinite(context))
    }
}
