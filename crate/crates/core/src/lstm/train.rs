use rand::seq::index;
use rand::Rng;

use super::model::{BiLstmModel, TrainConfig};
use super::network::{backward, batch_loss, DropoutMasks};
use super::optim::{optimizer_step, RmsPropState};
use super::weights::BiLstmWeights;
use crate::error::{Error, Result};
use crate::normalize::{fit_normalizer, make_windows, WindowSample};
use crate::panel::CountPanel;
use crate::rng::{stream_rng, tag};

/// Per-step errors on the normalized log scale.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub train_mae: Vec<f64>,
    pub val_mae: Vec<f64>,
}

/// Initial model for `panel` under `cfg`, before any optimization step.
pub fn init_model(panel: &CountPanel, cfg: &TrainConfig) -> Result<BiLstmModel> {
    cfg.validate()?;
    let norm = fit_normalizer(panel)?;
    let mut rng = stream_rng(cfg.seed, &[tag::INIT]);
    Ok(BiLstmModel {
        weights: BiLstmWeights::init(panel.n_series(), cfg.hidden, &mut rng),
        norm,
        keys: panel.keys.clone(),
        config: cfg.clone(),
    })
}

fn draw_batch<R: Rng + ?Sized>(n_windows: usize, batch_size: usize, rng: &mut R) -> Vec<usize> {
    if n_windows >= batch_size {
        index::sample(rng, n_windows, batch_size).into_vec()
    } else {
        (0..batch_size).map(|_| rng.random_range(0..n_windows)).collect()
    }
}

/// Fits the network with minibatch RMSprop.
///
/// Each step draws `batch_size` windows, scores the first
/// `validation_per_batch` of them without dropout, and takes one gradient
/// step on the rest under fresh dropout masks.
pub fn train(panel: &CountPanel, cfg: &TrainConfig) -> Result<(BiLstmModel, TrainHistory)> {
    if panel.n_days() <= cfg.k + 1 {
        return Err(Error::InsufficientHistory {
            available: panel.n_days(),
            required: cfg.k + 1,
        });
    }
    let mut model = init_model(panel, cfg)?;
    let windows: Vec<WindowSample> = make_windows(&model.norm.normalize(panel), cfg.k)?;
    let mut rng = stream_rng(cfg.seed, &[tag::TRAIN]);
    let mut state = RmsPropState::new(&model.weights);
    let mut history = TrainHistory::default();

    for _ in 0..cfg.steps {
        let picked = draw_batch(windows.len(), cfg.batch_size, &mut rng);
        let (val_idx, train_idx) = picked.split_at(cfg.validation_per_batch);
        let val: Vec<&WindowSample> = val_idx.iter().map(|&i| &windows[i]).collect();
        let batch: Vec<&WindowSample> = train_idx.iter().map(|&i| &windows[i]).collect();

        let val_mae = if val.is_empty() {
            0.0
        } else {
            batch_loss(&val, &model.weights, None)?
        };
        let masks: Vec<DropoutMasks> = batch
            .iter()
            .map(|_| DropoutMasks::sample(cfg.hidden, cfg.dropout, cfg.recurrent_dropout, &mut rng))
            .collect();
        let step = backward(&batch, &model.weights, Some(&masks))?;
        let (weights, next_state) = optimizer_step(&model.weights, &step.grad, &state, cfg.learning_rate)?;
        weights.check_finite("weights")?;
        model.weights = weights;
        state = next_state;
        history.train_mae.push(step.loss);
        history.val_mae.push(val_mae);
    }
    Ok((model, history))
}
