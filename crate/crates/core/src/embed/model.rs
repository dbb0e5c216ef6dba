use std::fmt;
use std::str::FromStr;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::store::{Matrix, Rows};
use crate::error::{Error, Result};
use crate::vocab::Offset;

/// Sigmoid inputs are clamped to `[-MAX_EXP, MAX_EXP]`.
pub const MAX_EXP: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// Skip-gram: the center predicts each context token.
    Skip,
    /// Continuous bag of words: the averaged context predicts the center.
    Cbow,
    /// Structured skip-gram: one output matrix per relative position.
    Sskip,
    /// Continuous window: the position-ordered context concatenation
    /// predicts the center.
    Cwin,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Skip, ModelKind::Cbow, ModelKind::Sskip, ModelKind::Cwin];

    pub fn is_order_aware(self) -> bool {
        matches!(self, ModelKind::Sskip | ModelKind::Cwin)
    }

    /// Whether the center's own input vector is the hidden layer.
    pub fn predicts_context(self) -> bool {
        matches!(self, ModelKind::Skip | ModelKind::Sskip)
    }

    pub fn default_learning_rate(self) -> f32 {
        match self {
            ModelKind::Skip | ModelKind::Sskip => 0.025,
            ModelKind::Cbow | ModelKind::Cwin => 0.05,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Skip => "SKIP",
            ModelKind::Cbow => "CBOW",
            ModelKind::Sskip => "SSKIP",
            ModelKind::Cwin => "CWIN",
        }
    }

    /// Width of the hidden layer fed to the output parameters.
    pub fn hidden_width(self, dim: usize, window: usize) -> usize {
        match self {
            ModelKind::Cwin => 2 * window * dim,
            _ => dim,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "skip" | "skipgram" => Ok(ModelKind::Skip),
            "cbow" => Ok(ModelKind::Cbow),
            "sskip" => Ok(ModelKind::Sskip),
            "cwin" | "cwindow" => Ok(ModelKind::Cwin),
            _ => Err(Error::Config(format!(
                "unknown model {s:?}; expected skip, cbow, sskip or cwin"
            ))),
        }
    }
}

/// Window slot of a relative position: `-window..=-1` map to
/// `0..window`, `1..=window` map to `window..2*window`.
pub fn position_slot(offset: Offset, window: usize) -> Result<usize> {
    let w = window as Offset;
    if offset == 0 || offset.abs() > w {
        return Err(Error::Shape(format!(
            "relative position {offset} outside window {window}"
        )));
    }
    Ok(if offset < 0 {
        (offset + w) as usize
    } else {
        (offset + w - 1) as usize
    })
}

/// Output-side parameters of a model.
///
/// SKIP/CBOW hold one `|V| x dim` matrix, SSKIP one per window slot, and CWIN
/// a single `|V| x (2 * window * dim)` matrix whose column blocks correspond
/// to window slots.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputParameters<M> {
    kind: ModelKind,
    window: usize,
    dim: usize,
    matrices: Vec<M>,
}

/// The part of the output parameters that scores a given relative position.
pub struct OutputSlice<'a, M> {
    pub matrix: &'a M,
    pub index: usize,
    pub offset: usize,
    pub width: usize,
}

impl<T: Float> OutputParameters<Matrix<T>> {
    pub fn zeros(kind: ModelKind, vocab_size: usize, dim: usize, window: usize) -> Self {
        let (count, width) = match kind {
            ModelKind::Skip | ModelKind::Cbow => (1, dim),
            ModelKind::Sskip => (2 * window, dim),
            ModelKind::Cwin => (1, 2 * window * dim),
        };
        OutputParameters {
            kind,
            window,
            dim,
            matrices: (0..count).map(|_| Matrix::zeros(vocab_size, width)).collect(),
        }
    }
}

impl<M> OutputParameters<M> {
    pub fn from_parts(kind: ModelKind, dim: usize, window: usize, matrices: Vec<M>) -> Self {
        OutputParameters {
            kind,
            window,
            dim,
            matrices,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrices(&self) -> &[M] {
        &self.matrices
    }

    pub fn matrices_mut(&mut self) -> &mut [M] {
        &mut self.matrices
    }

    pub fn map<N>(&self, f: impl FnMut(&M) -> N) -> OutputParameters<N> {
        OutputParameters {
            kind: self.kind,
            window: self.window,
            dim: self.dim,
            matrices: self.matrices.iter().map(f).collect(),
        }
    }

    /// Borrow every matrix, e.g. to share lock-free matrices with a worker.
    pub fn view(&self) -> OutputParameters<&M> {
        OutputParameters {
            kind: self.kind,
            window: self.window,
            dim: self.dim,
            matrices: self.matrices.iter().collect(),
        }
    }

    /// Locate the parameters that score context position `offset`.
    pub fn select_output_slice(&self, offset: Offset) -> Result<OutputSlice<'_, M>> {
        let slot = position_slot(offset, self.window)?;
        let (index, col, width) = match self.kind {
            ModelKind::Skip | ModelKind::Cbow => (0, 0, self.dim),
            ModelKind::Sskip => (slot, 0, self.dim),
            ModelKind::Cwin => (0, slot * self.dim, self.dim),
        };
        Ok(OutputSlice {
            matrix: &self.matrices[index],
            index,
            offset: col,
            width,
        })
    }
}

/// Input and output parameters of one model.
#[derive(Clone, Debug)]
pub struct ModelParams<M> {
    pub input: M,
    pub output: OutputParameters<M>,
}

#[inline]
fn sigmoid<T: Float>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// `-log(sigmoid(x))`, evaluated stably.
#[inline]
fn neg_log_sigmoid<T: Float>(x: T) -> T {
    if x > T::zero() {
        (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p() - x
    }
}

/// One negative-sampling update of the output rows against `hidden`.
///
/// Scores `target` as the positive and every entry of `negatives` (other than
/// `target` itself) as a negative, using the columns starting at `offset` in
/// `out`. Each output row is updated in place by `-lr * dL/du`; the gradient
/// of the loss with respect to `hidden`, computed from the rows as they were
/// before their update, is added to `grad_hidden`. Returns the loss
/// `-log s(u_pos . h) - sum_k log s(-u_k . h)`.
pub fn sgns_step<T, M>(
    hidden: &[T],
    grad_hidden: &mut [T],
    target: u32,
    negatives: &[u32],
    out: &mut M,
    offset: usize,
    lr: T,
) -> T
where
    T: Float,
    M: Rows<T> + ?Sized,
{
    debug_assert_eq!(hidden.len(), grad_hidden.len());
    let clamp = T::from(MAX_EXP).unwrap();
    let mut loss = T::zero();
    let pairs = std::iter::once((target, true))
        .chain(negatives.iter().filter(|&&n| n != target).map(|&n| (n, false)));
    for (row, positive) in pairs {
        let row = row as usize;
        let x = out.dot(row, offset, hidden);
        let xc = x.max(-clamp).min(clamp);
        let (coef, l) = if positive {
            (sigmoid(xc) - T::one(), neg_log_sigmoid(x))
        } else {
            (sigmoid(xc), neg_log_sigmoid(-x))
        };
        loss = loss + l;
        out.accumulate_into(row, offset, coef, grad_hidden);
        out.add_scaled(row, offset, -lr * coef, hidden);
    }
    loss
}

/// Build the hidden vector for a context.
///
/// CBOW: mean of the context input vectors (`dim` wide). CWIN: context input
/// vectors concatenated in slot order with absent slots left zero
/// (`2 * window * dim` wide). SKIP/SSKIP do not pool contexts; the hidden
/// layer is the center's own input vector, which this function copies.
///
/// Returns `Ok(false)` when a pooled model sees an empty context, in which
/// case the example should be skipped.
pub fn forward_context<T, M>(
    kind: ModelKind,
    center: u32,
    context: &[(u32, Offset)],
    window: usize,
    input: &M,
    hidden: &mut Vec<T>,
) -> Result<bool>
where
    T: Float,
    M: Rows<T> + ?Sized,
{
    let dim = input.n_cols();
    hidden.clear();
    hidden.resize(kind.hidden_width(dim, window), T::zero());
    match kind {
        ModelKind::Skip | ModelKind::Sskip => {
            input.read_row(center as usize, 0, hidden);
        }
        ModelKind::Cbow => {
            if context.is_empty() {
                return Ok(false);
            }
            let scale = T::one() / T::from(context.len()).unwrap();
            for &(id, _) in context {
                input.accumulate_into(id as usize, 0, scale, hidden);
            }
        }
        ModelKind::Cwin => {
            if context.is_empty() {
                return Ok(false);
            }
            for &(id, off) in context {
                let slot = position_slot(off, window)?;
                input.read_row(id as usize, 0, &mut hidden[slot * dim..(slot + 1) * dim]);
            }
        }
    }
    Ok(true)
}

/// Reusable buffers for [`train_example`].
#[derive(Default)]
pub struct Scratch<T> {
    hidden: Vec<T>,
    grad: Vec<T>,
    negatives: Vec<u32>,
}

/// Apply every SGD update produced by one center position and return the
/// summed loss together with the number of positive targets scored.
///
/// SKIP/SSKIP process each (center, context) pair in turn, re-reading the
/// center vector between pairs. CBOW/CWIN score the center once from the
/// pooled context. `draw_negatives(target, buf)` fills `buf` with the
/// negatives for a positive target.
#[allow(clippy::too_many_arguments)]
pub fn train_example<T, M, F>(
    kind: ModelKind,
    window: usize,
    input: &mut M,
    output: &mut OutputParameters<M>,
    center: u32,
    context: &[(u32, Offset)],
    lr: T,
    draw_negatives: &mut F,
    scratch: &mut Scratch<T>,
) -> Result<(T, usize)>
where
    T: Float,
    M: Rows<T>,
    F: FnMut(u32, &mut Vec<u32>),
{
    let dim = input.n_cols();
    let mut loss = T::zero();
    match kind {
        ModelKind::Skip | ModelKind::Sskip => {
            scratch.hidden.resize(dim, T::zero());
            for &(ctx, off) in context {
                let idx = output.select_output_slice(off)?.index;
                input.read_row(center as usize, 0, &mut scratch.hidden);
                scratch.grad.clear();
                scratch.grad.resize(dim, T::zero());
                draw_negatives(ctx, &mut scratch.negatives);
                loss = loss
                    + sgns_step(
                        &scratch.hidden,
                        &mut scratch.grad,
                        ctx,
                        &scratch.negatives,
                        &mut output.matrices[idx],
                        0,
                        lr,
                    );
                input.add_scaled(center as usize, 0, -lr, &scratch.grad);
            }
            Ok((loss, context.len()))
        }
        ModelKind::Cbow | ModelKind::Cwin => {
            if !forward_context(kind, center, context, window, input, &mut scratch.hidden)? {
                return Ok((T::zero(), 0));
            }
            scratch.grad.clear();
            scratch.grad.resize(scratch.hidden.len(), T::zero());
            draw_negatives(center, &mut scratch.negatives);
            loss = sgns_step(
                &scratch.hidden,
                &mut scratch.grad,
                center,
                &scratch.negatives,
                &mut output.matrices[0],
                0,
                lr,
            );
            if kind == ModelKind::Cbow {
                let share = -lr / T::from(context.len()).unwrap();
                for &(id, _) in context {
                    input.add_scaled(id as usize, 0, share, &scratch.grad);
                }
            } else {
                for &(id, off) in context {
                    let slot = position_slot(off, window)?;
                    input.add_scaled(id as usize, 0, -lr, &scratch.grad[slot * dim..(slot + 1) * dim]);
                }
            }
            Ok((loss, 1))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input_2x2() -> Matrix<f64> {
        Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0])
    }

    #[test]
    fn order_awareness_flags() {
        assert!(ModelKind::Sskip.is_order_aware());
        assert!(ModelKind::Cwin.is_order_aware());
        assert!(!ModelKind::Skip.is_order_aware());
        assert!(!ModelKind::Cbow.is_order_aware());
    }

    #[test]
    fn parse_model_names() {
        assert_eq!("SSKIP".parse::<ModelKind>().unwrap(), ModelKind::Sskip);
        assert_eq!("cwin".parse::<ModelKind>().unwrap(), ModelKind::Cwin);
        assert!("glove".parse::<ModelKind>().is_err());
    }

    #[test]
    fn cwin_concatenates_in_slot_order() {
        let inp = input_2x2();
        let mut h = Vec::new();
        forward_context(ModelKind::Cwin, 0, &[(1, 1), (0, -1)], 1, &inp, &mut h).unwrap();
        assert_eq!(h, vec![1.0, 2.0, 3.0, 4.0]);
        forward_context(ModelKind::Cwin, 0, &[(1, 1)], 1, &inp, &mut h).unwrap();
        assert_eq!(h, vec![0.0, 0.0, 3.0, 4.0]);
    }

    #[test]
    fn cbow_mean_cancels_opposites() {
        let inp = Matrix::from_vec(2, 2, vec![1.5, -2.0, -1.5, 2.0]);
        let mut h = Vec::new();
        forward_context(ModelKind::Cbow, 0, &[(0, -1), (1, 1)], 1, &inp, &mut h).unwrap();
        assert_eq!(h, vec![0.0, 0.0]);
    }

    #[test]
    fn pooled_models_skip_empty_context() {
        let inp = input_2x2();
        let mut h = Vec::new();
        assert!(!forward_context(ModelKind::Cbow, 0, &[], 1, &inp, &mut h).unwrap());
        assert!(!forward_context(ModelKind::Cwin, 0, &[], 1, &inp, &mut h).unwrap());
        assert!(forward_context(ModelKind::Skip, 1, &[], 1, &inp, &mut h).unwrap());
        assert_eq!(h, vec![3.0, 4.0]);
    }

    #[test]
    fn output_slices_by_model() {
        let skip = OutputParameters::<Matrix<f64>>::zeros(ModelKind::Skip, 3, 2, 1);
        let a = skip.select_output_slice(-1).unwrap();
        let b = skip.select_output_slice(1).unwrap();
        assert!(std::ptr::eq(a.matrix, b.matrix));

        let sskip = OutputParameters::<Matrix<f64>>::zeros(ModelKind::Sskip, 3, 2, 1);
        let a = sskip.select_output_slice(-1).unwrap();
        let b = sskip.select_output_slice(1).unwrap();
        assert!(!std::ptr::eq(a.matrix, b.matrix));

        let sskip3 = OutputParameters::<Matrix<f64>>::zeros(ModelKind::Sskip, 3, 2, 3);
        assert_eq!(sskip3.matrices().len(), 6);

        let cwin = OutputParameters::<Matrix<f64>>::zeros(ModelKind::Cwin, 3, 2, 3);
        assert_eq!(cwin.matrices()[0].n_cols(), 12);
        let s = cwin.select_output_slice(2).unwrap();
        assert_eq!((s.index, s.offset, s.width), (0, 8, 2));
        assert!(cwin.select_output_slice(0).is_err());
        assert!(cwin.select_output_slice(4).is_err());
    }

    #[test]
    fn positive_coefficient_at_zero_is_minus_half() {
        // u . v = 0 because the output row is zero.
        let mut out = Matrix::<f64>::zeros(1, 3);
        let h = [0.2, -0.1, 0.4];
        let mut g = [0.0; 3];
        let loss = sgns_step(&h, &mut g, 0, &[], &mut out, 0, 1.0);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        // dL/du = (s(0) - 1) h = -0.5 h, so u moves by +0.5 h with lr = 1.
        for (u, x) in out.row(0).iter().zip(h) {
            assert!((u - 0.5 * x).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_positive_barely_moves() {
        let mut out = Matrix::from_vec(1, 1, vec![10.0f64]);
        let h = [10.0];
        let mut g = [0.0];
        sgns_step(&h, &mut g, 0, &[], &mut out, 0, 0.025);
        assert!((out.row(0)[0] - 10.0).abs() < 1e-3);
        assert!(g[0].abs() < 0.03);
    }

    #[test]
    fn negative_equal_to_target_is_skipped() {
        let mut a = Matrix::from_vec(2, 2, vec![0.1, 0.2, 0.3, 0.4]);
        let mut b = a.clone();
        let h = [0.5, -0.5];
        let (mut g1, mut g2) = ([0.0; 2], [0.0; 2]);
        let l1 = sgns_step(&h, &mut g1, 0, &[0, 1], &mut a, 0, 0.1);
        let l2 = sgns_step(&h, &mut g2, 0, &[1], &mut b, 0, 0.1);
        assert_eq!(l1, l2);
        assert_eq!(a, b);
        assert_eq!(g1, g2);
    }
}
