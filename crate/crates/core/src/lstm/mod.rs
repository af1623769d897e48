//! Bidirectional LSTM: one recurrent layer per reading direction over a
//! `k`-day window of all series, followed by a linear read-out that emits the
//! next day of every series on the normalized log scale.

mod cell;
mod forecast;
mod model;
mod network;
mod optim;
mod train;
mod weights;

pub use cell::lstm_cell_step;
pub use forecast::{forecast_from_counts, forecast_horizon, predict_onestep_all};
pub use model::{BiLstmModel, PointForecast, TrainConfig};
pub use network::{backward, batch_loss, mae_loss, model_forward, BatchGradient, DropoutMasks};
pub use optim::{optimizer_step, RmsPropState, RMSPROP_DECAY, RMSPROP_EPSILON};
pub use train::{init_model, train, TrainHistory};
pub use weights::{count_parameters, parameter_count, BiLstmWeights, Block, BlockMut, Gate, LstmDirectionWeights};
