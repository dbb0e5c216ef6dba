//! Per-type probability estimates `P(t | name)` from name embeddings.
//!
//! Two classifier families:
//! - [`LinearPerTypeModel`]: one independent logistic regression per type,
//!   fitted by SGD on log loss with L2.
//! - [`MlpModel`]: one hidden ReLU layer shared by all types, one sigmoid
//!   output per type, fitted by mini-batch SGD with momentum on summed
//!   binary cross-entropy. A per-type variant trains one single-output
//!   network per type.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{TypeSet, TypeSystem};
use crate::error::{Error, Result};
use crate::evaluate::micro_f1;
use crate::par::{self, Strategy};

/// Row-major feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    n: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn new(n: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * dim {
            return Err(Error::Shape(format!("{} values for {n} x {dim} features", data.len())));
        }
        Ok(Features { n, dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], dim: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Shape(format!("row {i} has width {}, expected {dim}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Features { n: rows.len(), dim, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassifierKind {
    Lr,
    Mlp,
}

impl ClassifierKind {
    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Lr => "LR",
            ClassifierKind::Mlp => "MLP",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lr" => Ok(ClassifierKind::Lr),
            "mlp" => Ok(ClassifierKind::Mlp),
            _ => Err(Error::Config(format!("unknown classifier {s:?}; expected lr or mlp"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    /// MLP hidden width.
    pub hidden: usize,
    /// MLP mini-batch size.
    pub batch_size: usize,
    pub momentum: f64,
    /// Epochs without dev improvement before the MLP stops early.
    pub patience: usize,
    pub threshold: f64,
    pub seed: u64,
    /// Standardize each input dimension with train-split statistics.
    pub standardize: bool,
    /// Train one single-output MLP per type instead of a shared network.
    pub mlp_per_type: bool,
    #[serde(skip, default)]
    pub strategy: Strategy,
}

impl ClassifierConfig {
    /// LR defaults: 20 epochs, learning rate 0.01 with `1/sqrt(epoch)` decay,
    /// L2 1e-4.
    pub fn lr() -> Self {
        ClassifierConfig {
            kind: ClassifierKind::Lr,
            epochs: 20,
            learning_rate: 0.01,
            l2: 1e-4,
            hidden: 0,
            batch_size: 1,
            momentum: 0.0,
            patience: 0,
            threshold: 0.5,
            seed: 1,
            standardize: false,
            mlp_per_type: false,
            strategy: Strategy::default(),
        }
    }

    /// MLP defaults: 100 hidden units, batch 32, momentum 0.9, up to 50
    /// epochs with early stopping on dev micro-F1 (patience 5).
    pub fn mlp() -> Self {
        ClassifierConfig {
            kind: ClassifierKind::Mlp,
            epochs: 50,
            learning_rate: 0.01,
            l2: 1e-4,
            hidden: 100,
            batch_size: 32,
            momentum: 0.9,
            patience: 5,
            ..Self::lr()
        }
    }

    pub fn for_kind(kind: ClassifierKind) -> Self {
        match kind {
            ClassifierKind::Lr => Self::lr(),
            ClassifierKind::Mlp => Self::mlp(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("threshold {} outside (0, 1)", self.threshold)));
        }
        if !(self.learning_rate > 0.0) || !(self.l2 >= 0.0) {
            return Err(Error::Config("learning rate must be positive, l2 non-negative".into()));
        }
        if self.kind == ClassifierKind::Mlp && (self.hidden == 0 || self.batch_size == 0) {
            return Err(Error::Config("MLP needs positive hidden width and batch size".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy from a logit: `softplus(z) - y z`.
#[inline]
fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-dimension standardization fitted on training features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Features) -> Self {
        let n = x.len().max(1) as f64;
        let mut mean = vec![0.0; x.dim()];
        for r in x.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; x.dim()];
        for r in x.rows() {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| if v > 1e-12 { v.sqrt() } else { 1.0 })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, x: &Features) -> Features {
        let data = x.rows().flat_map(|r| self.apply(r)).collect();
        Features { n: x.n, dim: x.dim, data }
    }
}

/// `T` independent logistic regressions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearPerTypeModel {
    pub dim: usize,
    /// One weight vector per type.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub l2: f64,
    /// Mean log loss per epoch, per type.
    pub loss_history: Vec<Vec<f64>>,
}

impl LinearPerTypeModel {
    pub fn zeros(n_types: usize, dim: usize) -> Self {
        LinearPerTypeModel {
            dim,
            weights: vec![vec![0.0; dim]; n_types],
            biases: vec![0.0; n_types],
            l2: 0.0,
            loss_history: vec![Vec::new(); n_types],
        }
    }

    pub fn n_types(&self) -> usize {
        self.biases.len()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_width(x, self.dim)?;
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| sigmoid(dot(w, x) + b))
            .collect())
    }

    /// Mean log loss (without the L2 term) of type `t` over a dataset.
    pub fn log_loss(&self, t: usize, x: &Features, y: &[TypeSet]) -> f64 {
        let (w, b) = (&self.weights[t], self.biases[t]);
        let total: f64 = x
            .rows()
            .zip(y)
            .map(|(r, l)| bce_with_logit(dot(w, r) + b, l.contains(t) as u8 as f64))
            .sum();
        total / x.len().max(1) as f64
    }
}

fn check_width(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::Shape(format!("input width {} but model expects {dim}", x.len())));
    }
    Ok(())
}

fn check_training_data(x: &Features, y: &[TypeSet]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} inputs but {} label sets", x.len(), y.len())));
    }
    if x.is_empty() {
        return Err(Error::Training("no training examples".into()));
    }
    let n_types = y[0].universe();
    if y.iter().any(|l| l.universe() != n_types) {
        return Err(Error::Shape("label sets over different type systems".into()));
    }
    if x.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Shape("non-finite input features".into()));
    }
    Ok(n_types)
}

/// Bias of a type that has no positive training example.
const CONSTANT_NEGATIVE_BIAS: f64 = -20.0;

/// Fit one logistic regression per type by SGD on log loss + L2.
///
/// Each epoch visits the examples in a fresh shuffled order with learning
/// rate `learning_rate / sqrt(epoch + 1)`. Types are independent and are
/// trained in parallel; each has its own seeded RNG stream, so results do
/// not depend on the execution strategy.
pub fn train_lr(x: &Features, y: &[TypeSet], config: &ClassifierConfig) -> Result<LinearPerTypeModel> {
    config.validate()?;
    let n_types = check_training_data(x, y)?;
    let fitted = par::map_range(config.strategy, n_types, |t| fit_binary_lr(x, y, t, config));

    let mut model = LinearPerTypeModel::zeros(n_types, x.dim());
    model.l2 = config.l2;
    for (t, (w, b, hist)) in fitted.into_iter().enumerate() {
        model.weights[t] = w;
        model.biases[t] = b;
        model.loss_history[t] = hist;
    }
    Ok(model)
}

fn fit_binary_lr(
    x: &Features,
    y: &[TypeSet],
    t: usize,
    config: &ClassifierConfig,
) -> (Vec<f64>, f64, Vec<f64>) {
    let dim = x.dim();
    let labels: Vec<f64> = y.iter().map(|l| l.contains(t) as u8 as f64).collect();
    if labels.iter().all(|&l| l == 0.0) {
        warn!("type {t} has no positive training example; predicting it as absent");
        return (vec![0.0; dim], CONSTANT_NEGATIVE_BIAS, Vec::new());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(t as u64);
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lr = config.learning_rate / ((epoch + 1) as f64).sqrt();
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        for &i in &order {
            let r = x.row(i);
            let z = dot(&w, r) + b;
            loss += bce_with_logit(z, labels[i]);
            let g = sigmoid(z) - labels[i];
            for (wj, xj) in w.iter_mut().zip(r) {
                *wj -= lr * (g * xj + config.l2 * *wj);
            }
            b -= lr * g;
        }
        history.push(loss / x.len() as f64);
    }
    (w, b, history)
}

/// One-hidden-layer ReLU network with one sigmoid output per type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub dim: usize,
    pub hidden: usize,
    pub outputs: usize,
    /// `hidden x dim`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `outputs x hidden`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    /// Mean training loss per epoch (without the L2 term).
    pub loss_history: Vec<f64>,
}

/// Gradients with the same layout as [`MlpModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl MlpModel {
    pub fn zeros(dim: usize, hidden: usize, outputs: usize) -> Self {
        MlpModel {
            dim,
            hidden,
            outputs,
            w1: vec![0.0; hidden * dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; outputs * hidden],
            b2: vec![0.0; outputs],
            loss_history: Vec::new(),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(dim: usize, hidden: usize, outputs: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(dim, hidden, outputs);
        let b1 = (6.0 / (dim + hidden) as f64).sqrt();
        let b2 = (6.0 / (hidden + outputs) as f64).sqrt();
        m.w1.iter_mut().for_each(|w| *w = rng.gen_range(-b1..b1));
        m.w2.iter_mut().for_each(|w| *w = rng.gen_range(-b2..b2));
        m
    }

    /// Hidden pre-activations `W1 x + b1`.
    pub fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        self.w1
            .chunks_exact(self.dim)
            .zip(&self.b1)
            .map(|(w, b)| dot(w, x) + b)
            .collect()
    }

    /// Output logits.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let a1: Vec<f64> = self.pre_activation(x).into_iter().map(|z| z.max(0.0)).collect();
        self.w2
            .chunks_exact(self.hidden)
            .zip(&self.b2)
            .map(|(w, b)| dot(w, &a1) + b)
            .collect()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_width(x, self.dim)?;
        Ok(self.logits(x).into_iter().map(sigmoid).collect())
    }

    /// Mean summed cross-entropy over a dataset, without the L2 term.
    pub fn mean_loss(&self, x: &Features, y: &[TypeSet]) -> f64 {
        let total: f64 = x
            .rows()
            .zip(y)
            .map(|(r, l)| {
                self.logits(r)
                    .into_iter()
                    .enumerate()
                    .map(|(k, z)| bce_with_logit(z, l.contains(k) as u8 as f64))
                    .sum::<f64>()
            })
            .sum();
        total / x.len().max(1) as f64
    }

    fn is_finite(&self) -> bool {
        [&self.w1, &self.b1, &self.w2, &self.b2]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Regularized loss and its gradient over a batch.
///
/// Loss is the batch mean of the per-example summed binary cross-entropy plus
/// `l2 / 2 * (|W1|^2 + |W2|^2)`; biases are not regularized. Returns the
/// unregularized mean as well.
pub fn mlp_loss_and_grad(
    model: &MlpModel,
    x: &Features,
    y: &[TypeSet],
    batch: &[usize],
    l2: f64,
) -> (f64, f64, MlpGrads) {
    let (d, h, o) = (model.dim, model.hidden, model.outputs);
    let mut g = MlpGrads {
        w1: vec![0.0; h * d],
        b1: vec![0.0; h],
        w2: vec![0.0; o * h],
        b2: vec![0.0; o],
    };
    let scale = 1.0 / batch.len().max(1) as f64;
    let mut data_loss = 0.0;
    let mut a1 = vec![0.0; h];
    let mut dz2 = vec![0.0; o];
    let mut dz1 = vec![0.0; h];
    for &i in batch {
        let xi = x.row(i);
        let z1 = model.pre_activation(xi);
        for (a, &z) in a1.iter_mut().zip(&z1) {
            *a = z.max(0.0);
        }
        for k in 0..o {
            let z2 = dot(&model.w2[k * h..(k + 1) * h], &a1) + model.b2[k];
            let yk = y[i].contains(k) as u8 as f64;
            data_loss += bce_with_logit(z2, yk) * scale;
            dz2[k] = (sigmoid(z2) - yk) * scale;
        }
        dz1.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..o {
            let row = &model.w2[k * h..(k + 1) * h];
            let grow = &mut g.w2[k * h..(k + 1) * h];
            for j in 0..h {
                grow[j] += dz2[k] * a1[j];
                dz1[j] += dz2[k] * row[j];
            }
            g.b2[k] += dz2[k];
        }
        for j in 0..h {
            if z1[j] <= 0.0 {
                continue;
            }
            let grow = &mut g.w1[j * d..(j + 1) * d];
            for (gw, &xv) in grow.iter_mut().zip(xi) {
                *gw += dz1[j] * xv;
            }
            g.b1[j] += dz1[j];
        }
    }
    let mut reg = 0.0;
    if l2 > 0.0 {
        for (gw, w) in g.w1.iter_mut().zip(&model.w1).chain(g.w2.iter_mut().zip(&model.w2)) {
            *gw += l2 * w;
            reg += 0.5 * l2 * w * w;
        }
    }
    (data_loss + reg, data_loss, g)
}

/// Train one shared network on all types.
///
/// When `dev` is given, the parameters with the best dev micro-F1 are kept
/// (ties go to the lower dev loss) and training stops after `patience`
/// epochs without improvement.
pub fn train_mlp(
    x: &Features,
    y: &[TypeSet],
    dev: Option<(&Features, &[TypeSet])>,
    config: &ClassifierConfig,
) -> Result<MlpModel> {
    config.validate()?;
    let n_types = check_training_data(x, y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = MlpModel::init(x.dim(), config.hidden, n_types, &mut rng);
    let mut velocity = MlpGrads {
        w1: vec![0.0; model.w1.len()],
        b1: vec![0.0; model.b1.len()],
        w2: vec![0.0; model.w2.len()],
        b2: vec![0.0; model.b2.len()],
    };
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut best: Option<((f64, f64), MlpModel)> = None;
    let mut stale = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let (_, data_loss, g) = mlp_loss_and_grad(&model, x, y, batch, config.l2);
            epoch_loss += data_loss * batch.len() as f64;
            let lr = config.learning_rate;
            let mu = config.momentum;
            for (p, (v, gv)) in [
                (&mut model.w1, (&mut velocity.w1, &g.w1)),
                (&mut model.b1, (&mut velocity.b1, &g.b1)),
                (&mut model.w2, (&mut velocity.w2, &g.w2)),
                (&mut model.b2, (&mut velocity.b2, &g.b2)),
            ] {
                for ((pi, vi), gi) in p.iter_mut().zip(v.iter_mut()).zip(gv.iter()) {
                    *vi = mu * *vi - lr * gi;
                    *pi += *vi;
                }
            }
        }
        let mean = epoch_loss / x.len() as f64;
        if !mean.is_finite() || !model.is_finite() {
            return Err(Error::Divergence(format!(
                "MLP loss became {mean} at epoch {} (learning rate {})",
                epoch + 1,
                config.learning_rate
            )));
        }
        model.loss_history.push(mean);

        if let Some((dx, dy)) = dev.filter(|(dx, _)| !dx.is_empty()) {
            let pred: Vec<TypeSet> = dx
                .rows()
                .map(|r| predict_labels(&model.predict_proba(r).expect("width checked"), config.threshold))
                .collect();
            let f1 = micro_f1(&pred, dy)?.f1;
            let dev_loss = model.mean_loss(dx, dy);
            debug!("MLP epoch {}: loss {mean:.5}, dev loss {dev_loss:.5}, dev micro-F1 {f1:.4}", epoch + 1);
            let better = |(bf, bl): &(f64, f64)| f1 > *bf || (f1 == *bf && dev_loss < *bl);
            if best.as_ref().is_none_or(|(b, _)| better(b)) {
                best = Some(((f1, dev_loss), model.clone()));
                stale = 0;
            } else {
                stale += 1;
                if config.patience > 0 && stale >= config.patience {
                    debug!("MLP early stop after epoch {}", epoch + 1);
                    break;
                }
            }
        }
    }
    Ok(match best {
        Some((_, mut m)) => {
            m.loss_history = model.loss_history;
            m
        }
        None => model,
    })
}

/// A trained classifier of either family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ClassifierModel {
    Lr(LinearPerTypeModel),
    Mlp(MlpModel),
    /// One single-output network per type.
    MlpPerType(Vec<MlpModel>),
}

impl ClassifierModel {
    pub fn input_dim(&self) -> usize {
        match self {
            ClassifierModel::Lr(m) => m.dim,
            ClassifierModel::Mlp(m) => m.dim,
            ClassifierModel::MlpPerType(ms) => ms.first().map_or(0, |m| m.dim),
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            ClassifierModel::Lr(m) => m.predict_proba(x),
            ClassifierModel::Mlp(m) => m.predict_proba(x),
            ClassifierModel::MlpPerType(ms) => {
                let mut out = Vec::with_capacity(ms.len());
                for m in ms {
                    out.push(m.predict_proba(x)?[0]);
                }
                Ok(out)
            }
        }
    }
}

/// Train the classifier family selected by `config.kind`.
pub fn train_classifier(
    x: &Features,
    y: &[TypeSet],
    dev: Option<(&Features, &[TypeSet])>,
    config: &ClassifierConfig,
) -> Result<ClassifierModel> {
    match (config.kind, config.mlp_per_type) {
        (ClassifierKind::Lr, _) => Ok(ClassifierModel::Lr(train_lr(x, y, config)?)),
        (ClassifierKind::Mlp, false) => Ok(ClassifierModel::Mlp(train_mlp(x, y, dev, config)?)),
        (ClassifierKind::Mlp, true) => {
            let n_types = check_training_data(x, y)?;
            let project = |labels: &[TypeSet], t: usize| -> Vec<TypeSet> {
                labels
                    .iter()
                    .map(|l| TypeSet::from_ids(1, l.contains(t).then_some(0)))
                    .collect()
            };
            let models = par::map_range(config.strategy, n_types, |t| {
                let yt = project(y, t);
                let dt = dev.map(|(dx, dy)| (dx, project(dy, t)));
                let mut cfg = config.clone();
                cfg.seed = config.seed.wrapping_add(t as u64);
                train_mlp(x, &yt, dt.as_ref().map(|(dx, dy)| (*dx, dy.as_slice())), &cfg)
            });
            Ok(ClassifierModel::MlpPerType(models.into_iter().collect::<Result<_>>()?))
        }
    }
}

/// Bit `t` is set iff `proba[t] >= threshold`.
pub fn predict_labels(proba: &[f64], threshold: f64) -> TypeSet {
    TypeSet::from_ids(
        proba.len(),
        proba.iter().enumerate().filter(|(_, &p)| p >= threshold).map(|(i, _)| i),
    )
}

const MODEL_FORMAT: &str = "nametype-classifier";
const MODEL_VERSION: u32 = 1;

/// Serializable classifier with everything needed to apply it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub format: String,
    pub version: u32,
    pub type_names: Vec<String>,
    pub type_system_digest: String,
    pub config: ClassifierConfig,
    pub standardizer: Option<Standardizer>,
    pub model: ClassifierModel,
}

impl TrainedClassifier {
    /// Fit on `train` (and `dev` for model selection) under `config`.
    pub fn fit(
        type_system: &TypeSystem,
        train: (&Features, &[TypeSet]),
        dev: Option<(&Features, &[TypeSet])>,
        config: &ClassifierConfig,
    ) -> Result<Self> {
        let standardizer = config.standardize.then(|| Standardizer::fit(train.0));
        let (tx, dx);
        let (train_x, dev) = match &standardizer {
            Some(s) => {
                tx = s.transform(train.0);
                dx = dev.map(|(x, y)| (s.transform(x), y));
                (&tx, dx.as_ref().map(|(x, y)| (x, *y)))
            }
            None => (train.0, dev),
        };
        let model = train_classifier(train_x, train.1, dev, config)?;
        Ok(TrainedClassifier {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            type_names: type_system.names().to_vec(),
            type_system_digest: type_system.digest(),
            config: config.clone(),
            standardizer,
            model,
        })
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.standardizer {
            Some(s) => {
                check_width(x, s.mean.len())?;
                self.model.predict_proba(&s.apply(x))
            }
            None => self.model.predict_proba(x),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<TypeSet> {
        Ok(predict_labels(&self.predict_proba(x)?, self.config.threshold))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let m: TrainedClassifier = serde_json::from_reader(std::io::BufReader::new(file))?;
        if m.format != MODEL_FORMAT || m.version != MODEL_VERSION {
            return Err(Error::Config(format!(
                "unsupported model container {} v{}",
                m.format, m.version
            )));
        }
        Ok(m)
    }
}
