use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::embed::ModelKind;
use crate::error::{Error, Result};

/// Where a trained matrix came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub model: ModelKind,
    pub dim: usize,
    /// SHA-256 of the training configuration.
    pub config_digest: String,
}

/// Token-aligned dense `f32` embeddings, one row per token.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    data: Vec<f32>,
    meta: Option<EmbeddingMeta>,
}

impl EmbeddingMatrix {
    /// Rows of `data` (row-major, `tokens.len() * dim` values) follow `tokens`.
    pub fn new(tokens: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != tokens.len() * dim {
            return Err(Error::Shape(format!(
                "{} values for {} tokens of width {dim}",
                data.len(),
                tokens.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Shape(format!(
                "non-finite value in row of token {:?}",
                tokens[i / dim.max(1)]
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Shape(format!("duplicate token {t:?}")));
            }
        }
        Ok(EmbeddingMatrix {
            tokens,
            index,
            dim,
            data,
            meta: None,
        })
    }

    pub fn with_meta(mut self, meta: EmbeddingMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn meta(&self) -> Option<&EmbeddingMeta> {
        self.meta.as_ref()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.tokens.iter().map(String::as_str).zip(self.data.chunks_exact(self.dim.max(1)))
    }

    /// The stored row for `token`; case-sensitive, never synthesized.
    pub fn lookup(&self, token: &str) -> Option<&[f32]> {
        self.index.get(token).map(|&i| self.row(i))
    }

    /// Keep only rows whose token is in `keep`, preserving order.
    pub fn restrict(&self, keep: &HashSet<String>) -> Self {
        let mut tokens = Vec::new();
        let mut data = Vec::new();
        for (t, row) in self.iter() {
            if keep.contains(t) {
                tokens.push(t.to_string());
                data.extend_from_slice(row);
            }
        }
        let mut m = EmbeddingMatrix::new(tokens, self.dim, data)
            .expect("subset of a valid matrix is valid");
        m.meta = self.meta.clone();
        m
    }

    /// Cosine similarity between two tokens' rows.
    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        Some(cosine(self.lookup(a)?, self.lookup(b)?))
    }
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}
