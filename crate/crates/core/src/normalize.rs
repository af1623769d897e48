//! Log-scale z-scoring of count series and slicing into training windows.

use ndarray::{s, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::CountPanel;

/// Smallest admissible per-series scale.
pub const SCALE_FLOOR: f64 = 1e-6;

/// Per-series location and scale of `ln(1 + y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub location: Vec<f64>,
    pub scale: Vec<f64>,
}

impl NormalizationSpec {
    pub fn n_series(&self) -> usize {
        self.location.len()
    }

    pub fn normalize_value(&self, series: usize, y: f64) -> f64 {
        ((1.0 + y).ln() - self.location[series]) / self.scale[series]
    }

    pub fn denormalize_value(&self, series: usize, z: f64) -> f64 {
        ((z * self.scale[series] + self.location[series]).exp() - 1.0).max(0.0)
    }

    /// Normalizes a real-valued count matrix (days x series).
    pub fn normalize_counts(&self, counts: &Array2<f64>) -> Array2<f64> {
        let mut out = counts.clone();
        for ((_, d), v) in out.indexed_iter_mut() {
            *v = self.normalize_value(d, *v);
        }
        out
    }

    pub fn normalize(&self, panel: &CountPanel) -> Array2<f64> {
        self.normalize_counts(&panel.as_f64())
    }

    pub fn denormalize(&self, z: &Array2<f64>) -> Array2<f64> {
        let mut out = z.clone();
        for ((_, d), v) in out.indexed_iter_mut() {
            *v = self.denormalize_value(d, *v);
        }
        out
    }

    pub fn denormalize_row(&self, z: &Array1<f64>) -> Array1<f64> {
        Array1::from_shape_fn(z.len(), |d| self.denormalize_value(d, z[d]))
    }
}

/// Mean and population standard deviation of `ln(1 + y)` per series.
pub fn fit_normalizer(panel: &CountPanel) -> Result<NormalizationSpec> {
    fit_normalizer_counts(&panel.as_f64())
}

/// [`fit_normalizer`] over a real-valued count matrix (days x series).
pub fn fit_normalizer_counts(counts: &Array2<f64>) -> Result<NormalizationSpec> {
    let t = counts.nrows();
    if t < 2 {
        return Err(Error::InsufficientHistory {
            available: t,
            required: 1,
        });
    }
    let logs = counts.mapv(|y| (1.0 + y).ln());
    let mut location = Vec::with_capacity(counts.ncols());
    let mut scale = Vec::with_capacity(counts.ncols());
    for col in logs.axis_iter(Axis(1)) {
        let mean = col.sum() / t as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t as f64;
        location.push(mean);
        scale.push(var.sqrt().max(SCALE_FLOOR));
    }
    Ok(NormalizationSpec { location, scale })
}

/// One training example: `k` consecutive normalized rows and the row after.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub input: Array2<f64>,
    pub target: Array1<f64>,
    pub target_day: usize,
}

/// Every window of `k` rows followed by a target row, targets `k..T`.
pub fn make_windows(normalized: &Array2<f64>, k: usize) -> Result<Vec<WindowSample>> {
    let t = normalized.nrows();
    if k == 0 {
        return Err(Error::InvalidArgument("lookback must be at least 1".into()));
    }
    if t <= k {
        return Err(Error::InsufficientHistory {
            available: t,
            required: k,
        });
    }
    Ok((k..t)
        .map(|day| WindowSample {
            input: normalized.slice(s![day - k..day, ..]).to_owned(),
            target: normalized.row(day).to_owned(),
            target_day: day,
        })
        .collect())
}
