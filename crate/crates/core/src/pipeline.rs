//! Trained model + panel → point guesses → predictive grid → ensembles.

use crate::bayes::{build_predictive_grid, PredictiveCell};
use crate::ensemble::{cumulative_paths, draw_ensemble, Ensemble};
use crate::error::Result;
use crate::lstm::{forecast_horizon, predict_onestep_all, BiLstmModel, PointForecast};
use crate::panel::CountPanel;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub horizon: usize,
    pub n_draws: usize,
    pub seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            horizon: 30,
            n_draws: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    /// Observed days `k..T` followed by the horizon.
    pub point: PointForecast,
    pub grid: Vec<PredictiveCell>,
    /// Daily count draws over the same days as `point`.
    pub daily: Ensemble,
    /// Observed totals before the first predicted day.
    pub offsets: Vec<f64>,
    pub cumulative: Ensemble,
}

/// Observed totals per series over days `0..first_day`.
pub fn cumulative_offsets(panel: &CountPanel, first_day: usize) -> Vec<f64> {
    (0..panel.n_series())
        .map(|d| {
            panel
                .values
                .column(d)
                .iter()
                .take(first_day)
                .map(|&v| v as f64)
                .sum()
        })
        .collect()
}

pub fn run_pipeline(model: &BiLstmModel, panel: &CountPanel, opts: &PipelineOptions) -> Result<PipelineRun> {
    let observed = predict_onestep_all(model, panel)?;
    let future = forecast_horizon(model, panel, opts.horizon)?;
    let point = observed.concat(&future)?;
    let grid = build_predictive_grid(&point, panel)?;
    let daily = draw_ensemble(&grid, opts.n_draws, opts.seed)?;
    let offsets = cumulative_offsets(panel, model.lookback());
    let cumulative = cumulative_paths(&daily, &offsets)?;
    Ok(PipelineRun {
        point,
        grid,
        daily,
        offsets,
        cumulative,
    })
}
