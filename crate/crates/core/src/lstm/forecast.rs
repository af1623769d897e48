use std::collections::VecDeque;

use ndarray::{Array1, Array2};

use super::model::{BiLstmModel, PointForecast};
use super::network::model_forward;
use crate::error::{Error, Result};
use crate::panel::{check_keys, CountPanel};

/// One-step-ahead guesses for every observed day with a full lookback.
pub fn predict_onestep_all(model: &BiLstmModel, panel: &CountPanel) -> Result<PointForecast> {
    check_keys(&model.keys, &panel.keys)?;
    let k = model.lookback();
    let t = panel.n_days();
    if t <= k {
        return Err(Error::InsufficientHistory {
            available: t,
            required: k,
        });
    }
    let z = model.norm.normalize(panel);
    let mut values = Array2::zeros((t - k, panel.n_series()));
    for day in k..t {
        let out = model_forward(z.slice(ndarray::s![day - k..day, ..]), &model.weights, None)?;
        values.row_mut(day - k).assign(&model.norm.denormalize_row(&out));
    }
    Ok(PointForecast {
        days: (k..t).collect(),
        values,
        observed: vec![true; t - k],
    })
}

/// Iterated forecast for the `horizon` days after the panel ends.
pub fn forecast_horizon(model: &BiLstmModel, panel: &CountPanel, horizon: usize) -> Result<PointForecast> {
    check_keys(&model.keys, &panel.keys)?;
    forecast_from_counts(model, &panel.as_f64(), horizon)
}

/// Roll-out from a real-valued count history (days x series).
///
/// Each predicted day is appended to the window as counts, renormalized, and
/// fed back for the next day.
pub fn forecast_from_counts(model: &BiLstmModel, counts: &Array2<f64>, horizon: usize) -> Result<PointForecast> {
    let k = model.lookback();
    let t = counts.nrows();
    if counts.ncols() != model.n_series() {
        return Err(Error::Shape(format!(
            "history has {} series, model expects {}",
            counts.ncols(),
            model.n_series()
        )));
    }
    if t < k {
        return Err(Error::InsufficientHistory {
            available: t,
            required: k.saturating_sub(1),
        });
    }
    let n = model.n_series();
    let z = model.norm.normalize_counts(counts);
    let mut window: VecDeque<Array1<f64>> = (t - k..t).map(|day| z.row(day).to_owned()).collect();
    let mut values = Array2::zeros((horizon, n));
    for step in 0..horizon {
        let input = Array2::from_shape_fn((k, n), |(r, d)| window[r][d]);
        let out = model_forward(input.view(), &model.weights, None)?;
        let y = model.norm.denormalize_row(&out);
        let fed_back = Array1::from_shape_fn(n, |d| model.norm.normalize_value(d, y[d]));
        window.pop_front();
        window.push_back(fed_back);
        values.row_mut(step).assign(&y);
    }
    Ok(PointForecast {
        days: (t..t + horizon).collect(),
        values,
        observed: vec![false; horizon],
    })
}
