#![allow(dead_code)]

use std::io::Cursor;

use nametype::classify::{Features, MlpModel};
use nametype::dataset::TypeSet;
use nametype::embed::{self, ModelKind, TrainedModel, TrainingConfig};
use nametype::vocab::{build_vocabulary_from_reader, EncodedCorpus, NegativeTable};
use nametype::EmbeddingMatrix;

/// Train one model on in-memory lines with every token kept.
pub fn train_lines(lines: &[String], config: &TrainingConfig) -> EmbeddingMatrix {
    train_model(lines, config).embeddings
}

pub fn train_model(lines: &[String], config: &TrainingConfig) -> TrainedModel {
    let text = lines.join("\n");
    let (vocab, _) = build_vocabulary_from_reader(Cursor::new(text), std::path::Path::new("<memory>"), 1, false).unwrap();
    let corpus = EncodedCorpus::from_lines(lines.iter().map(String::as_str), &vocab);
    let table = NegativeTable::new(&vocab, 1_000_000, 0.75).unwrap();
    embed::train(config, &corpus, &vocab, &table).unwrap()
}

pub fn small_config(kind: ModelKind, dim: usize, window: usize, negatives: usize, seed: u64) -> TrainingConfig {
    TrainingConfig {
        dim,
        window,
        negatives,
        seed,
        ..TrainingConfig::new(kind)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Negative-sampling loss of one training example, written from scratch.
///
/// `input` is `vocab x dim`, `output[m]` the m-th output matrix with rows of
/// `width` values. SKIP/SSKIP examples carry exactly one context pair.
#[derive(Clone)]
pub struct SgnsCase {
    pub kind: ModelKind,
    pub window: usize,
    pub dim: usize,
    pub vocab: usize,
    pub input: Vec<f64>,
    pub output: Vec<Vec<f64>>,
    pub center: u32,
    pub context: Vec<(u32, i32)>,
    pub negatives: Vec<u32>,
}

impl SgnsCase {
    pub fn width(&self) -> usize {
        match self.kind {
            ModelKind::Cwin => 2 * self.window * self.dim,
            _ => self.dim,
        }
    }

    fn slot(&self, off: i32) -> usize {
        let w = self.window as i32;
        if off < 0 {
            (off + w) as usize
        } else {
            (off + w - 1) as usize
        }
    }

    fn in_row(&self, id: u32) -> &[f64] {
        &self.input[id as usize * self.dim..(id as usize + 1) * self.dim]
    }

    pub fn loss(&self) -> f64 {
        let (hidden, matrix, target) = match self.kind {
            ModelKind::Skip | ModelKind::Sskip => {
                let (ctx, off) = self.context[0];
                let m = if self.kind == ModelKind::Sskip { self.slot(off) } else { 0 };
                (self.in_row(self.center).to_vec(), m, ctx)
            }
            ModelKind::Cbow => {
                let mut h = vec![0.0; self.dim];
                for &(c, _) in &self.context {
                    for (a, b) in h.iter_mut().zip(self.in_row(c)) {
                        *a += b / self.context.len() as f64;
                    }
                }
                (h, 0, self.center)
            }
            ModelKind::Cwin => {
                let mut h = vec![0.0; self.width()];
                for &(c, off) in &self.context {
                    let s = self.slot(off);
                    h[s * self.dim..(s + 1) * self.dim].copy_from_slice(self.in_row(c));
                }
                (h, 0, self.center)
            }
        };
        let w = self.width();
        let row = |id: u32| &self.output[matrix][id as usize * w..(id as usize + 1) * w];
        let mut l = -sigmoid(dot(row(target), &hidden)).ln();
        for &n in &self.negatives {
            l -= sigmoid(-dot(row(n), &hidden)).ln();
        }
        l
    }
}

/// Summed binary cross-entropy averaged over examples, plus the L2 term on
/// both weight matrices.
pub fn mlp_reference_loss(m: &MlpModel, x: &Features, y: &[TypeSet], l2: f64) -> f64 {
    let mut total = 0.0;
    for (i, labels) in y.iter().enumerate() {
        let xi = x.row(i);
        let a1: Vec<f64> = (0..m.hidden)
            .map(|j| (dot(&m.w1[j * m.dim..(j + 1) * m.dim], xi) + m.b1[j]).max(0.0))
            .collect();
        for k in 0..m.outputs {
            let p = sigmoid(dot(&m.w2[k * m.hidden..(k + 1) * m.hidden], &a1) + m.b2[k]);
            total -= if labels.contains(k) { p.ln() } else { (1.0 - p).ln() };
        }
    }
    let reg: f64 = m.w1.iter().chain(&m.w2).map(|w| w * w).sum();
    total / y.len() as f64 + 0.5 * l2 * reg
}

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Exact-match fraction and (TP, FP, FN) by looping over every decision.
pub fn brute_force_metrics<B: AsRef<[bool]>>(pred: &[B], gold: &[B]) -> (f64, u64, u64, u64) {
    let (mut exact, mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for (p, g) in pred.iter().zip(gold) {
        let mut all = true;
        for (a, b) in p.as_ref().iter().zip(g.as_ref()) {
            match (a, b) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
            all &= a == b;
        }
        exact += all as u64;
    }
    let acc = if pred.is_empty() { 0.0 } else { exact as f64 / pred.len() as f64 };
    (acc, tp, fp, fn_)
}

pub fn mean_cosine(m: &EmbeddingMatrix, a: &[String], b: &[String]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0;
    for x in a {
        for y in b {
            if x != y {
                sum += m.cosine(x, y).unwrap();
                n += 1;
            }
        }
    }
    sum / n as f64
}
