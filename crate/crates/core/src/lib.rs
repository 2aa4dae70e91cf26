//! Hierarchical multi-LSTM news classifier.
//!
//! Documents are segmented into an S×W token grid, embedded per token,
//! encoded word → sentence → document by two stacked LSTMs and classified into
//! eight categories by a dense/softmax head. A flat BiLSTM baseline over a
//! trainable lookup table is provided for comparison.

mod binio;
pub mod corpus;
pub mod embedding;
pub mod config;
pub mod model;
pub mod nncore;
pub mod rng;
pub mod synthetic;
pub mod trainer;
