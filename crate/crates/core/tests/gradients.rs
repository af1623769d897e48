//! BPTT gradients against central finite differences, and the forward pass
//! against a plain-loop re-implementation.

use countcast_core::lstm::{
    backward, batch_loss, model_forward, BiLstmWeights, DropoutMasks, Gate, LstmDirectionWeights,
};
use countcast_core::normalize::WindowSample;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD_EPS: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;
const ABS_FLOOR: f64 = 1e-7;

fn random_weights(d: usize, h: usize, rng: &mut ChaCha8Rng) -> BiLstmWeights {
    let mut w = BiLstmWeights::init(d, h, rng);
    for block in w.blocks_mut() {
        for v in block.data.iter_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    w
}

fn random_batch(d: usize, k: usize, b: usize, rng: &mut ChaCha8Rng) -> Vec<WindowSample> {
    (0..b)
        .map(|i| WindowSample {
            input: Array2::from_shape_fn((k, d), |_| rng.random_range(-1.5..1.5)),
            target: Array1::from_shape_fn(d, |_| rng.random_range(-1.5..1.5)),
            target_day: k + i,
        })
        .collect()
}

/// Largest violation of `|g − fd| <= max(REL_TOL·max(|g|,|fd|), ABS_FLOOR)`,
/// reported as (block, index, analytic, numeric).
fn finite_difference_check(
    weights: &BiLstmWeights,
    batch: &[&WindowSample],
    masks: Option<&[DropoutMasks]>,
) -> Vec<(String, usize, f64, f64)> {
    let analytic = backward(batch, weights, masks).unwrap().grad;
    let names: Vec<String> = weights.blocks().iter().map(|b| b.name.clone()).collect();
    let mut failures = Vec::new();
    for (block_idx, name) in names.iter().enumerate() {
        let len = weights.blocks()[block_idx].data.len();
        for i in 0..len {
            let mut plus = weights.clone();
            plus.blocks_mut()[block_idx].data[i] += FD_EPS;
            let mut minus = weights.clone();
            minus.blocks_mut()[block_idx].data[i] -= FD_EPS;
            let numeric = (batch_loss(batch, &plus, masks).unwrap() - batch_loss(batch, &minus, masks).unwrap())
                / (2.0 * FD_EPS);
            let g = analytic.blocks()[block_idx].data[i];
            let diff = (g - numeric).abs();
            if diff > (REL_TOL * g.abs().max(numeric.abs())).max(ABS_FLOOR) {
                failures.push((name.clone(), i, g, numeric));
            }
        }
    }
    failures
}

#[test]
fn bptt_matches_finite_differences_tiny_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let weights = random_weights(3, 2, &mut rng);
    let batch = random_batch(3, 4, 2, &mut rng);
    let refs: Vec<&WindowSample> = batch.iter().collect();
    let failures = finite_difference_check(&weights, &refs, None);
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn bptt_matches_finite_differences_with_dropout_masks() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..20 {
        let d = rng.random_range(1..=4);
        let h = rng.random_range(1..=3);
        let k = rng.random_range(1..=5);
        let weights = random_weights(d, h, &mut rng);
        let batch = random_batch(d, k, 3, &mut rng);
        let refs: Vec<&WindowSample> = batch.iter().collect();
        let masks: Vec<DropoutMasks> = (0..3).map(|_| DropoutMasks::sample(h, 0.3, 0.3, &mut rng)).collect();
        let failures = finite_difference_check(&weights, &refs, Some(&masks));
        assert!(failures.is_empty(), "d={d} h={h} k={k}: {failures:?}");
    }
}

#[test]
fn duplicating_batch_keeps_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let weights = random_weights(3, 2, &mut rng);
    let batch = random_batch(3, 4, 2, &mut rng);
    let once: Vec<&WindowSample> = batch.iter().collect();
    let twice: Vec<&WindowSample> = batch.iter().chain(batch.iter()).collect();
    let a = backward(&once, &weights, None).unwrap();
    let b = backward(&twice, &weights, None).unwrap();
    assert!((a.loss - b.loss).abs() < 1e-14);
    for (x, y) in a.grad.blocks().iter().zip(b.grad.blocks()) {
        for (u, v) in x.data.iter().zip(y.data) {
            assert!((u - v).abs() < 1e-14, "{}", x.name);
        }
    }
}

// Straight-line oracle: the same network written with index loops.

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn gate_pre(g: &Gate, x: &[f64], h: &[f64], r: usize) -> f64 {
    let mut acc = g.b[r];
    for (j, xv) in x.iter().enumerate() {
        acc += g.w[[r, j]] * xv;
    }
    for (j, hv) in h.iter().enumerate() {
        acc += g.u[[r, j]] * hv;
    }
    acc
}

fn loop_direction(w: &LstmDirectionWeights, rows: &[Vec<f64>]) -> Vec<f64> {
    let h_size = w.input.b.len();
    let mut h = vec![0.0; h_size];
    let mut c = vec![0.0; h_size];
    for x in rows {
        let mut h_new = vec![0.0; h_size];
        let mut c_new = vec![0.0; h_size];
        for r in 0..h_size {
            let i = sigmoid(gate_pre(&w.input, x, &h, r));
            let f = sigmoid(gate_pre(&w.forget, x, &h, r));
            let g = gate_pre(&w.cell, x, &h, r).tanh();
            let o = sigmoid(gate_pre(&w.output, x, &h, r));
            c_new[r] = f * c[r] + i * g;
            h_new[r] = o * c_new[r].tanh();
        }
        h = h_new;
        c = c_new;
    }
    h
}

fn loop_forward(w: &BiLstmWeights, window: &Array2<f64>) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = window.rows().into_iter().map(|r| r.to_vec()).collect();
    let reversed: Vec<Vec<f64>> = rows.iter().rev().cloned().collect();
    let mut features = loop_direction(&w.forward, &rows);
    features.extend(loop_direction(&w.backward, &reversed));
    (0..w.dense_b.len())
        .map(|d| w.dense_b[d] + features.iter().enumerate().map(|(j, f)| w.dense_w[[d, j]] * f).sum::<f64>())
        .collect()
}

#[test]
fn forward_matches_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let weights = random_weights(3, 2, &mut rng);
    let window = Array2::from_shape_fn((4, 3), |_| rng.random_range(-2.0..2.0));
    let fast = model_forward(window.view(), &weights, None).unwrap();
    let slow = loop_forward(&weights, &window);
    for (a, b) in fast.iter().zip(&slow) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn reversed_window_with_swapped_directions_is_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let weights = random_weights(3, 2, &mut rng);
    let window = Array2::from_shape_fn((5, 3), |_| rng.random_range(-1.0..1.0));
    let mut swapped = weights.clone();
    std::mem::swap(&mut swapped.forward, &mut swapped.backward);
    let h = weights.hidden();
    for d in 0..weights.n_series() {
        for j in 0..h {
            swapped.dense_w[[d, j]] = weights.dense_w[[d, h + j]];
            swapped.dense_w[[d, h + j]] = weights.dense_w[[d, j]];
        }
    }
    let reversed = window.slice(ndarray::s![..;-1, ..]).to_owned();
    let a = model_forward(window.view(), &weights, None).unwrap();
    let b = model_forward(reversed.view(), &swapped, None).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-13);
    }
}

#[test]
fn permuting_series_permutes_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let weights = random_weights(4, 3, &mut rng);
    let perm = [2usize, 0, 3, 1];
    let window = Array2::from_shape_fn((5, 4), |_| rng.random_range(-1.0..1.0));
    let permuted_window = Array2::from_shape_fn((5, 4), |(t, j)| window[[t, perm[j]]]);
    let mut pw = weights.clone();
    for (dst, src) in [(&mut pw.forward, &weights.forward), (&mut pw.backward, &weights.backward)] {
        for (gd, gs) in [
            (&mut dst.input, &src.input),
            (&mut dst.forget, &src.forget),
            (&mut dst.cell, &src.cell),
            (&mut dst.output, &src.output),
        ] {
            gd.w = Array2::from_shape_fn(gs.w.dim(), |(r, j)| gs.w[[r, perm[j]]]);
        }
    }
    pw.dense_w = Array2::from_shape_fn(weights.dense_w.dim(), |(d, j)| weights.dense_w[[perm[d], j]]);
    pw.dense_b = Array1::from_shape_fn(4, |d| weights.dense_b[perm[d]]);
    let a = model_forward(window.view(), &weights, None).unwrap();
    let b = model_forward(permuted_window.view(), &pw, None).unwrap();
    for d in 0..4 {
        assert!((b[d] - a[perm[d]]).abs() < 1e-13);
    }
}

#[test]
fn zero_dropout_training_pass_equals_inference() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let weights = random_weights(3, 3, &mut rng);
    let window = Array2::from_shape_fn((4, 3), |_| rng.random_range(-1.0..1.0));
    let masks = DropoutMasks::sample(3, 0.0, 0.0, &mut rng);
    assert_eq!(
        model_forward(window.view(), &weights, Some(&masks)).unwrap(),
        model_forward(window.view(), &weights, None).unwrap()
    );
}
