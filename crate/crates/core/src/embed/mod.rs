//! Negative-sampling training of SKIP, CBOW, SSKIP and CWIN embeddings.
//!
//! Workers train on disjoint sentence ranges and update shared parameters
//! without locks. With one worker and a fixed seed the result is
//! bit-reproducible.

mod model;
pub mod store;

use std::sync::atomic::{AtomicU64, Ordering};

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use model::{
    forward_context, position_slot, sgns_step, train_example, ModelKind, ModelParams,
    OutputParameters, OutputSlice, Scratch, MAX_EXP,
};
use store::{HogwildMatrix, Matrix};

use crate::embedding::{EmbeddingMatrix, EmbeddingMeta};
use crate::error::{Error, Result};
use crate::par::{self, Strategy};
use crate::vocab::{keep_probability, line_windows, EncodedCorpus, NegativeTable, Vocabulary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub model: ModelKind,
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f32,
    pub min_lr: f32,
    pub seed: u64,
    pub workers: usize,
    /// Draw the effective window per center from `1..=window`.
    pub dynamic_window: bool,
    /// Subsampling threshold; `None` disables subsampling.
    pub subsample: Option<f64>,
}

impl TrainingConfig {
    /// Defaults: dim 200, window 3, 10 negatives, 5 epochs, model-specific
    /// learning rate decaying to `1e-4` of its initial value.
    pub fn new(model: ModelKind) -> Self {
        let lr = model.default_learning_rate();
        TrainingConfig {
            model,
            dim: 200,
            window: 3,
            negatives: 10,
            epochs: 5,
            initial_lr: lr,
            min_lr: lr * 1e-4,
            seed: 1,
            workers: 1,
            dynamic_window: false,
            subsample: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("window must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        if !(self.initial_lr > 0.0) {
            return Err(Error::Config("initial_lr must be positive".into()));
        }
        if !(self.min_lr >= 0.0 && self.min_lr <= self.initial_lr) {
            return Err(Error::Config("min_lr must lie in [0, initial_lr]".into()));
        }
        if let Some(t) = self.subsample {
            if !(t > 0.0) {
                return Err(Error::Config("subsample threshold must be positive".into()));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the serialized configuration.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Result of [`train`].
pub struct TrainedModel {
    pub embeddings: EmbeddingMatrix,
    pub output: OutputParameters<Matrix<f32>>,
    /// Mean loss per positive target for each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Input vectors uniform in `[-0.5/dim, 0.5/dim]`, output parameters zero.
pub fn initialize(config: &TrainingConfig, vocab_size: usize) -> ModelParams<Matrix<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(u64::MAX);
    let half = 0.5 / config.dim as f32;
    let input: Vec<f32> = (0..vocab_size * config.dim)
        .map(|_| rng.gen_range(-half..=half))
        .collect();
    ModelParams {
        input: Matrix::from_vec(vocab_size, config.dim, input),
        output: OutputParameters::zeros(config.model, vocab_size, config.dim, config.window),
    }
}

/// Train input embeddings for every vocabulary token.
///
/// The learning rate decays linearly from `initial_lr` to `min_lr` over
/// `epochs * corpus tokens` planned updates. Worker ranges and RNG streams
/// are fixed by the seed, so results only vary with `workers > 1`.
pub fn train(
    config: &TrainingConfig,
    corpus: &EncodedCorpus,
    vocab: &Vocabulary,
    neg_table: &NegativeTable,
) -> Result<TrainedModel> {
    train_with(config, corpus, vocab, neg_table, Strategy::default())
}

/// [`train`] with an explicit execution strategy for the workers.
pub fn train_with(
    config: &TrainingConfig,
    corpus: &EncodedCorpus,
    vocab: &Vocabulary,
    neg_table: &NegativeTable,
    strategy: Strategy,
) -> Result<TrainedModel> {
    config.validate()?;
    let n_tokens = corpus.n_tokens();
    if n_tokens == 0 {
        return Err(Error::Training("corpus has no in-vocabulary tokens".into()));
    }
    if let Some(&bad) = neg_table.as_slice().iter().find(|&&i| i as usize >= vocab.len()) {
        return Err(Error::Config(format!(
            "negative table references row {bad} outside the vocabulary"
        )));
    }

    let init = initialize(config, vocab.len());
    let shared = ModelParams {
        input: HogwildMatrix::from_matrix(&init.input),
        output: init.output.map(HogwildMatrix::from_matrix),
    };

    let keep = config.subsample.map(|t| {
        let total = vocab.total_count() as f64;
        vocab
            .counts()
            .iter()
            .map(|&c| keep_probability(c as f64 / total, t).expect("validated inputs"))
            .collect::<Vec<f64>>()
    });

    let ranges = corpus.partition(config.workers);
    let planned = (config.epochs as u64 * n_tokens).max(1);
    let processed = AtomicU64::new(0);
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let parts = par::map_range(strategy, ranges.len(), |worker| {
            let job = Worker {
                config,
                shared: &shared,
                neg_table,
                keep: keep.as_deref(),
                processed: &processed,
                planned,
            };
            job.run(corpus, ranges[worker].clone(), epoch, worker)
        });
        let parts: Vec<(f64, u64)> = parts.into_iter().collect::<Result<_>>()?;
        let (loss, count) = parts
            .iter()
            .fold((0.0, 0u64), |(l, c), &(pl, pc)| (l + pl, c + pc));
        let mean = if count > 0 { loss / count as f64 } else { 0.0 };
        if !mean.is_finite() || !shared.input.is_finite() {
            return Err(Error::Divergence(format!(
                "non-finite parameters after epoch {} of {} (lr {})",
                epoch + 1,
                config.model,
                config.initial_lr
            )));
        }
        info!(
            "{} epoch {}/{}: mean loss {:.5} over {} targets",
            config.model,
            epoch + 1,
            config.epochs,
            mean,
            count
        );
        epoch_losses.push(mean);
    }

    let input = shared.input.to_matrix();
    let output = shared.output.map(HogwildMatrix::to_matrix);
    let embeddings = EmbeddingMatrix::new(vocab.tokens().to_vec(), config.dim, input.into_vec())?
        .with_meta(EmbeddingMeta {
            model: config.model,
            dim: config.dim,
            config_digest: config.digest(),
        });
    Ok(TrainedModel {
        embeddings,
        output,
        epoch_losses,
    })
}

struct Worker<'a> {
    config: &'a TrainingConfig,
    shared: &'a ModelParams<HogwildMatrix>,
    neg_table: &'a NegativeTable,
    keep: Option<&'a [f64]>,
    processed: &'a AtomicU64,
    planned: u64,
}

impl Worker<'_> {
    fn run(
        &self,
        corpus: &EncodedCorpus,
        range: std::ops::Range<usize>,
        epoch: usize,
        worker: usize,
    ) -> Result<(f64, u64)> {
        let cfg = self.config;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(((epoch as u64) << 32) | worker as u64);

        let mut input = &self.shared.input;
        let mut output = self.shared.output.view();
        let mut scratch = Scratch::default();
        let mut kept = Vec::new();
        let (mut loss, mut count) = (0.0f64, 0u64);
        let lr_span = cfg.initial_lr - cfg.min_lr;
        let table = self.neg_table;
        let n_neg = cfg.negatives;

        for sentence in &corpus.sentences[range] {
            let done = self.processed.fetch_add(sentence.len() as u64, Ordering::Relaxed);
            let progress = (done as f64 / self.planned as f64).min(1.0) as f32;
            let lr = (cfg.initial_lr - lr_span * progress).max(cfg.min_lr);

            let ids: &[u32] = match self.keep {
                Some(keep) => {
                    kept.clear();
                    for &id in sentence {
                        if rng.gen::<f64>() < keep[id as usize] {
                            kept.push(id);
                        }
                    }
                    &kept
                }
                None => sentence,
            };
            if ids.is_empty() {
                continue;
            }
            let windows = if cfg.dynamic_window {
                line_windows(ids, cfg.window, Some(&mut rng))
            } else {
                line_windows::<ChaCha8Rng>(ids, cfg.window, None)
            };
            for w in windows {
                let mut draw = |_target: u32, buf: &mut Vec<u32>| {
                    buf.clear();
                    buf.extend((0..n_neg).map(|_| table.sample(&mut rng)));
                };
                let (l, n) = train_example(
                    cfg.model,
                    cfg.window,
                    &mut input,
                    &mut output,
                    w.center,
                    &w.context,
                    lr,
                    &mut draw,
                    &mut scratch,
                )?;
                loss += l as f64;
                count += n as u64;
            }
        }
        debug!("worker {worker} epoch {epoch}: {count} targets");
        Ok((loss, count))
    }
}
