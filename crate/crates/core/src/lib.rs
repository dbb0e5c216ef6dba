//! Word embedding training and fine-grained name typing evaluation.
//!
//! The pipeline: build a [`vocab::Vocabulary`] from a tokenized corpus, train
//! embeddings with [`embed::train`] (or read them with [`embed_io`]), build a
//! multi-label name typing dataset with [`dataset`], fit per-type classifiers
//! with [`classify`] and score them with [`evaluate`].

pub mod classify;
pub mod embed;
pub mod embed_io;
pub mod embedding;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod par;
pub mod synth;
pub mod vocab;

pub use embedding::EmbeddingMatrix;
pub use error::{Error, Result};
