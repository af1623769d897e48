use ndarray::{Array1, ArrayView1};

use super::weights::{Gate, LstmDirectionWeights};
use crate::error::{Error, Result};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn pre_activation(gate: &Gate, x: &ArrayView1<f64>, h: &Array1<f64>) -> Array1<f64> {
    gate.w.dot(x) + gate.u.dot(h) + &gate.b
}

/// Values kept from a forward step for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub x: Array1<f64>,
    /// Previous hidden state after the recurrent mask.
    pub h_masked: Array1<f64>,
    pub c_prev: Array1<f64>,
    pub i: Array1<f64>,
    pub f: Array1<f64>,
    pub g: Array1<f64>,
    pub o: Array1<f64>,
    pub tanh_c: Array1<f64>,
}

pub(crate) fn step_cached(
    x: ArrayView1<f64>,
    h: ArrayView1<f64>,
    c: ArrayView1<f64>,
    w: &LstmDirectionWeights,
    rec_mask: ArrayView1<f64>,
) -> (Array1<f64>, Array1<f64>, StepCache) {
    let h_masked = &h * &rec_mask;
    let i = pre_activation(&w.input, &x, &h_masked).mapv_into(sigmoid);
    let f = pre_activation(&w.forget, &x, &h_masked).mapv_into(sigmoid);
    let g = pre_activation(&w.cell, &x, &h_masked).mapv_into(f64::tanh);
    let o = pre_activation(&w.output, &x, &h_masked).mapv_into(sigmoid);
    let c_next = &f * &c + &i * &g;
    let tanh_c = c_next.mapv(f64::tanh);
    let h_next = &o * &tanh_c;
    let cache = StepCache {
        x: x.to_owned(),
        h_masked,
        c_prev: c.to_owned(),
        i,
        f,
        g,
        o,
        tanh_c,
    };
    (h_next, c_next, cache)
}

/// One LSTM step with sigmoid gates and tanh candidate/output:
///
/// ```text
/// i = σ(W_i x + U_i (h⊙m) + b_i)      f, o alike
/// g = tanh(W_g x + U_g (h⊙m) + b_g)
/// c' = f⊙c + i⊙g,   h' = o⊙tanh(c')
/// ```
///
/// `rec_mask` is the recurrent dropout mask (all ones at inference).
pub fn lstm_cell_step(
    x: ArrayView1<f64>,
    h: ArrayView1<f64>,
    c: ArrayView1<f64>,
    w: &LstmDirectionWeights,
    rec_mask: ArrayView1<f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let hidden = w.hidden();
    if x.len() != w.n_inputs() || h.len() != hidden || c.len() != hidden || rec_mask.len() != hidden {
        return Err(Error::Shape(format!(
            "cell step expects input {} and state {hidden}, got {}, {}, {}, mask {}",
            w.n_inputs(),
            x.len(),
            h.len(),
            c.len(),
            rec_mask.len()
        )));
    }
    let finite = |v: &ArrayView1<f64>| v.iter().all(|a| a.is_finite());
    if !finite(&x) || !finite(&h) || !finite(&c) {
        return Err(Error::NonFinite("LSTM cell input".into()));
    }
    let (h_next, c_next, _) = step_cached(x, h, c, w, rec_mask);
    Ok((h_next, c_next))
}

/// Gradient accumulators for one direction share the weight layout.
pub(crate) fn step_backward(
    cache: &StepCache,
    w: &LstmDirectionWeights,
    rec_mask: &Array1<f64>,
    dh: &Array1<f64>,
    dc: &Array1<f64>,
    grad: &mut LstmDirectionWeights,
) -> (Array1<f64>, Array1<f64>) {
    let d_o = dh * &cache.tanh_c;
    let dc_total = dc + &(dh * &cache.o * &cache.tanh_c.mapv(|t| 1.0 - t * t));
    let d_i = &dc_total * &cache.g;
    let d_g = &dc_total * &cache.i;
    let d_f = &dc_total * &cache.c_prev;
    let dc_prev = &dc_total * &cache.f;

    let da_i = d_i * &cache.i.mapv(|s| s * (1.0 - s));
    let da_f = d_f * &cache.f.mapv(|s| s * (1.0 - s));
    let da_g = d_g * &cache.g.mapv(|t| 1.0 - t * t);
    let da_o = d_o * &cache.o.mapv(|s| s * (1.0 - s));

    let mut dh_masked = Array1::<f64>::zeros(dh.len());
    for (da, gate, gate_grad) in [
        (&da_i, &w.input, &mut grad.input),
        (&da_f, &w.forget, &mut grad.forget),
        (&da_g, &w.cell, &mut grad.cell),
        (&da_o, &w.output, &mut grad.output),
    ] {
        for (r, &a) in da.iter().enumerate() {
            if a != 0.0 {
                gate_grad.w.row_mut(r).scaled_add(a, &cache.x);
                gate_grad.u.row_mut(r).scaled_add(a, &cache.h_masked);
            }
        }
        gate_grad.b += da;
        dh_masked += &gate.u.t().dot(da);
    }
    (dh_masked * rec_mask, dc_prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array1;

    #[test]
    fn zero_everything_gives_zero_state() {
        let w = LstmDirectionWeights::zeros(3, 2);
        let z3 = Array1::zeros(3);
        let z2 = Array1::zeros(2);
        let ones = Array1::ones(2);
        let (h, c) = lstm_cell_step(z3.view(), z2.view(), z2.view(), &w, ones.view()).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_cell_state_halves() {
        let w = LstmDirectionWeights::zeros(3, 2);
        let x = Array1::zeros(3);
        let h = Array1::zeros(2);
        let c = Array1::ones(2);
        let ones = Array1::ones(2);
        let (h, c) = lstm_cell_step(x.view(), h.view(), c.view(), &w, ones.view()).unwrap();
        for d in 0..2 {
            assert_abs_diff_eq!(c[d], 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(h[d], 0.5 * 0.5f64.tanh(), epsilon = 1e-15);
        }
    }

    #[test]
    fn nan_input_is_rejected() {
        let w = LstmDirectionWeights::zeros(3, 2);
        let x = Array1::from(vec![0.0, f64::NAN, 1.0]);
        let z = Array1::zeros(2);
        let ones = Array1::ones(2);
        assert!(matches!(
            lstm_cell_step(x.view(), z.view(), z.view(), &w, ones.view()),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let w = LstmDirectionWeights::zeros(3, 2);
        let x = Array1::zeros(4);
        let z = Array1::zeros(2);
        assert!(matches!(
            lstm_cell_step(x.view(), z.view(), z.view(), &w, z.view()),
            Err(Error::Shape(_))
        ));
    }
}
