use super::weights::BiLstmWeights;
use crate::error::{Error, Result};

pub const RMSPROP_DECAY: f64 = 0.9;
pub const RMSPROP_EPSILON: f64 = 1e-8;

/// Running mean of squared gradients, one accumulator per weight.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsPropState {
    pub accumulators: BiLstmWeights,
}

impl RmsPropState {
    pub fn new(weights: &BiLstmWeights) -> Self {
        RmsPropState {
            accumulators: weights.zeros_like(),
        }
    }
}

/// One RMSprop update:
/// `acc ← 0.9·acc + 0.1·g²`, `w ← w − lr·g/√(acc + 1e−8)`.
pub fn optimizer_step(
    weights: &BiLstmWeights,
    grads: &BiLstmWeights,
    state: &RmsPropState,
    learning_rate: f64,
) -> Result<(BiLstmWeights, RmsPropState)> {
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(Error::InvalidArgument(format!("learning rate {learning_rate}")));
    }
    let mut next = weights.clone();
    let mut next_state = state.clone();
    for ((w, acc), g) in next
        .blocks_mut()
        .into_iter()
        .zip(next_state.accumulators.blocks_mut())
        .zip(grads.blocks())
    {
        if w.shape != g.shape || w.shape != acc.shape {
            return Err(Error::Shape(format!("gradient block {} has shape {:?}", g.name, g.shape)));
        }
        for ((wv, av), &gv) in w.data.iter_mut().zip(acc.data.iter_mut()).zip(g.data) {
            *av = RMSPROP_DECAY * *av + (1.0 - RMSPROP_DECAY) * gv * gv;
            *wv -= learning_rate * gv / (*av + RMSPROP_EPSILON).sqrt();
        }
    }
    Ok((next, next_state))
}
