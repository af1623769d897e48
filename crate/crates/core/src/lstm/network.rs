//! Bidirectional forward pass, MAE loss and backpropagation through time.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::cell::{step_backward, step_cached, StepCache};
use super::weights::{BiLstmWeights, LstmDirectionWeights};
use crate::error::{Error, Result};
use crate::normalize::WindowSample;

/// Inverted-dropout masks for one sample: entries are 0 or `1/(1-p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub recurrent_forward: Array1<f64>,
    pub recurrent_backward: Array1<f64>,
    /// Applied to the concatenated `[h_fwd; h_bwd]`.
    pub output: Array1<f64>,
}

impl DropoutMasks {
    pub fn ones(hidden: usize) -> Self {
        DropoutMasks {
            recurrent_forward: Array1::ones(hidden),
            recurrent_backward: Array1::ones(hidden),
            output: Array1::ones(2 * hidden),
        }
    }

    pub fn sample<R: Rng + ?Sized>(hidden: usize, output_rate: f64, recurrent_rate: f64, rng: &mut R) -> Self {
        DropoutMasks {
            recurrent_forward: bernoulli_mask(hidden, recurrent_rate, rng),
            recurrent_backward: bernoulli_mask(hidden, recurrent_rate, rng),
            output: bernoulli_mask(2 * hidden, output_rate, rng),
        }
    }
}

fn bernoulli_mask<R: Rng + ?Sized>(n: usize, rate: f64, rng: &mut R) -> Array1<f64> {
    if rate <= 0.0 {
        return Array1::ones(n);
    }
    let keep = 1.0 / (1.0 - rate);
    Array1::from_shape_fn(n, |_| if rng.random::<f64>() < rate { 0.0 } else { keep })
}

struct DirectionTrace {
    caches: Vec<StepCache>,
}

struct ForwardTrace {
    forward: DirectionTrace,
    backward: DirectionTrace,
    /// Masked concatenated state fed to the dense layer.
    features: Array1<f64>,
    output: Array1<f64>,
}

fn run_direction<'a>(
    rows: impl Iterator<Item = ndarray::ArrayView1<'a, f64>>,
    w: &LstmDirectionWeights,
    rec_mask: &Array1<f64>,
) -> (Array1<f64>, DirectionTrace) {
    let hidden = w.hidden();
    let mut h = Array1::zeros(hidden);
    let mut c = Array1::zeros(hidden);
    let mut caches = Vec::new();
    for x in rows {
        let (h_next, c_next, cache) = step_cached(x, h.view(), c.view(), w, rec_mask.view());
        h = h_next;
        c = c_next;
        caches.push(cache);
    }
    (h, DirectionTrace { caches })
}

fn check_window(weights: &BiLstmWeights, window: &ArrayView2<f64>) -> Result<()> {
    if window.nrows() == 0 || window.ncols() != weights.forward.n_inputs() {
        return Err(Error::Shape(format!(
            "window is {}x{}, model expects width {}",
            window.nrows(),
            window.ncols(),
            weights.forward.n_inputs()
        )));
    }
    if window.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("input window".into()));
    }
    Ok(())
}

fn check_masks(weights: &BiLstmWeights, masks: &DropoutMasks) -> Result<()> {
    let h = weights.hidden();
    if masks.recurrent_forward.len() != h || masks.recurrent_backward.len() != h || masks.output.len() != 2 * h {
        return Err(Error::Shape(format!("dropout masks do not match hidden size {h}")));
    }
    Ok(())
}

fn forward_trace(weights: &BiLstmWeights, window: ArrayView2<f64>, masks: &DropoutMasks) -> ForwardTrace {
    let (h_fwd, forward) = run_direction(window.rows().into_iter(), &weights.forward, &masks.recurrent_forward);
    let (h_bwd, backward) = run_direction(
        window.slice(s![..;-1, ..]).rows().into_iter(),
        &weights.backward,
        &masks.recurrent_backward,
    );
    let features = concatenate(Axis(0), &[h_fwd.view(), h_bwd.view()]).expect("equal-length states") * &masks.output;
    let output = weights.dense_w.dot(&features) + &weights.dense_b;
    ForwardTrace {
        forward,
        backward,
        features,
        output,
    }
}

/// Maps a `k x D` window to a D-vector on the normalized scale.
///
/// The forward direction reads rows first to last, the backward direction
/// last to first; their final hidden states are concatenated and passed
/// through the linear read-out. `masks = None` disables dropout.
pub fn model_forward(
    window: ArrayView2<f64>,
    weights: &BiLstmWeights,
    masks: Option<&DropoutMasks>,
) -> Result<Array1<f64>> {
    check_window(weights, &window)?;
    let ones;
    let masks = match masks {
        Some(m) => {
            check_masks(weights, m)?;
            m
        }
        None => {
            ones = DropoutMasks::ones(weights.hidden());
            &ones
        }
    };
    let output = forward_trace(weights, window, masks).output;
    if output.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("model output".into()));
    }
    Ok(output)
}

/// Mean of `|pred - target|` over all entries.
pub fn mae_loss(pred: &Array2<f64>, target: &Array2<f64>) -> Result<f64> {
    if pred.dim() != target.dim() || pred.is_empty() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let total: f64 = pred.iter().zip(target).map(|(a, b)| (a - b).abs()).sum();
    Ok(total / pred.len() as f64)
}

/// Loss of a batch and its gradient.
#[derive(Debug, Clone)]
pub struct BatchGradient {
    pub loss: f64,
    pub grad: BiLstmWeights,
}

fn backprop_direction(
    trace: &DirectionTrace,
    w: &LstmDirectionWeights,
    rec_mask: &Array1<f64>,
    dh_last: Array1<f64>,
    grad: &mut LstmDirectionWeights,
) {
    let mut dh = dh_last;
    let mut dc = Array1::zeros(dh.len());
    for cache in trace.caches.iter().rev() {
        let (dh_prev, dc_prev) = step_backward(cache, w, rec_mask, &dh, &dc, grad);
        dh = dh_prev;
        dc = dc_prev;
    }
}

/// Exact gradient of the batch MAE with respect to every weight.
///
/// `masks`, when given, holds one fixed mask set per sample. The subgradient
/// of `|e|` at `e = 0` is taken as 0.
pub fn backward(
    batch: &[&WindowSample],
    weights: &BiLstmWeights,
    masks: Option<&[DropoutMasks]>,
) -> Result<BatchGradient> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if let Some(m) = masks {
        if m.len() != batch.len() {
            return Err(Error::Shape(format!("{} mask sets for {} samples", m.len(), batch.len())));
        }
        for set in m {
            check_masks(weights, set)?;
        }
    }
    let n_series = weights.n_series();
    let hidden = weights.hidden();
    let scale = 1.0 / (batch.len() * n_series) as f64;
    let ones = DropoutMasks::ones(hidden);
    let mut grad = weights.zeros_like();
    let mut abs_total = 0.0;

    for (idx, sample) in batch.iter().enumerate() {
        check_window(weights, &sample.input.view())?;
        if sample.target.len() != n_series {
            return Err(Error::Shape(format!("target has {} entries, expected {n_series}", sample.target.len())));
        }
        let mask = masks.map_or(&ones, |m| &m[idx]);
        let trace = forward_trace(weights, sample.input.view(), mask);

        let residual = &trace.output - &sample.target;
        abs_total += residual.iter().map(|e| e.abs()).sum::<f64>();
        let d_out = residual.mapv(|e| if e > 0.0 { scale } else if e < 0.0 { -scale } else { 0.0 });

        for (r, &a) in d_out.iter().enumerate() {
            if a != 0.0 {
                grad.dense_w.row_mut(r).scaled_add(a, &trace.features);
            }
        }
        grad.dense_b += &d_out;
        let d_features = weights.dense_w.t().dot(&d_out) * &mask.output;
        let dh_fwd = d_features.slice(s![..hidden]).to_owned();
        let dh_bwd = d_features.slice(s![hidden..]).to_owned();
        backprop_direction(&trace.forward, &weights.forward, &mask.recurrent_forward, dh_fwd, &mut grad.forward);
        backprop_direction(&trace.backward, &weights.backward, &mask.recurrent_backward, dh_bwd, &mut grad.backward);
    }

    grad.check_finite("gradient")?;
    let loss = abs_total * scale;
    if !loss.is_finite() {
        return Err(Error::NonFinite("batch loss".into()));
    }
    Ok(BatchGradient { loss, grad })
}

/// Batch MAE without gradients (dropout disabled unless masks are given).
pub fn batch_loss(batch: &[&WindowSample], weights: &BiLstmWeights, masks: Option<&[DropoutMasks]>) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let n_series = weights.n_series();
    let mut pred = Array2::zeros((batch.len(), n_series));
    let mut target = Array2::zeros((batch.len(), n_series));
    for (idx, sample) in batch.iter().enumerate() {
        let out = model_forward(sample.input.view(), weights, masks.map(|m| &m[idx]))?;
        if sample.target.len() != n_series {
            return Err(Error::Shape(format!("target has {} entries, expected {n_series}", sample.target.len())));
        }
        pred.row_mut(idx).assign(&out);
        target.row_mut(idx).assign(&sample.target);
    }
    mae_loss(&pred, &target)
}
