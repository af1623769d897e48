//! Poisson likelihood with a Gamma(ŷ, 1) prior on its mean. Integrating the
//! mean out gives Negative Binomial predictives in closed form:
//!
//! * observed cell: NB(r = ŷ + y_obs, q = 2/3), mean (ŷ + y_obs)/2,
//!   variance 3/2 × mean;
//! * unobserved cell: NB(r = ŷ, q = 1/2), mean ŷ, variance 2 × mean.
//!
//! With `pmf(y) = Γ(r+y) / (Γ(y+1) Γ(r)) · q^r · (1−q)^y`.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::lstm::PointForecast;
use crate::panel::{CountPanel, SeriesKey};

/// Floor applied to the prior shape ŷ.
pub const SHAPE_FLOOR: f64 = 1e-6;
pub const POSTERIOR_Q: f64 = 2.0 / 3.0;
pub const PRIOR_Q: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flavor {
    Posterior,
    Prior,
    /// Point mass at zero.
    DegenerateZero,
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flavor::Posterior => "posterior",
            Flavor::Prior => "prior",
            Flavor::DegenerateZero => "degenerate_zero",
        })
    }
}

/// Negative Binomial with real shape `r` and zero-direction probability `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegBinParams {
    pub r: f64,
    pub q: f64,
    pub flavor: Flavor,
}

impl NegBinParams {
    fn checked(r: f64, q: f64, flavor: Flavor) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!("negative binomial shape {r}")));
        }
        Ok(NegBinParams { r, q, flavor })
    }

    /// Posterior-predictive family member with an explicit shape.
    pub fn posterior_with_shape(r: f64) -> Result<Self> {
        Self::checked(r, POSTERIOR_Q, Flavor::Posterior)
    }

    /// Prior-predictive family member with an explicit shape.
    pub fn prior_with_shape(r: f64) -> Result<Self> {
        Self::checked(r, PRIOR_Q, Flavor::Prior)
    }

    pub fn degenerate() -> Self {
        NegBinParams {
            r: SHAPE_FLOOR,
            q: POSTERIOR_Q,
            flavor: Flavor::DegenerateZero,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.flavor == Flavor::DegenerateZero
    }

    /// Rate of the Gamma mixing distribution, `q / (1 − q)`.
    pub fn gamma_rate(&self) -> f64 {
        self.q / (1.0 - self.q)
    }
}

fn check_y_hat(y_hat: f64) -> Result<()> {
    if !y_hat.is_finite() || y_hat < 0.0 {
        return Err(Error::InvalidArgument(format!("point guess must be finite and non-negative, got {y_hat}")));
    }
    Ok(())
}

/// Predictive for a cell whose count `y_obs` was observed.
pub fn posterior_predictive_params(y_hat: f64, y_obs: u64) -> Result<NegBinParams> {
    check_y_hat(y_hat)?;
    if y_hat < SHAPE_FLOOR && y_obs == 0 {
        return Ok(NegBinParams::degenerate());
    }
    NegBinParams::posterior_with_shape(y_hat.max(SHAPE_FLOOR) + y_obs as f64)
}

/// Predictive for a cell with no observation.
pub fn prior_predictive_params(y_hat: f64) -> Result<NegBinParams> {
    check_y_hat(y_hat)?;
    if y_hat < SHAPE_FLOOR {
        return Ok(NegBinParams::degenerate());
    }
    NegBinParams::prior_with_shape(y_hat)
}

/// `Pr(Y = y)`, evaluated through log-gamma.
pub fn nb_pmf(params: &NegBinParams, y: u64) -> f64 {
    if params.is_degenerate() {
        return if y == 0 { 1.0 } else { 0.0 };
    }
    nb_ln_pmf(params, y).exp()
}

fn nb_ln_pmf(params: &NegBinParams, y: u64) -> f64 {
    let (r, q) = (params.r, params.q);
    let y = y as f64;
    ln_gamma(r + y) - ln_gamma(y + 1.0) - ln_gamma(r) + r * q.ln() + y * (1.0 - q).ln()
}

/// `(mean, variance) = (r(1−q)/q, mean/q)`.
pub fn nb_moments(params: &NegBinParams) -> (f64, f64) {
    if params.is_degenerate() {
        return (0.0, 0.0);
    }
    let mean = params.r * (1.0 - params.q) / params.q;
    (mean, mean / params.q)
}

/// `Pr(Y <= y)`.
pub fn nb_cdf(params: &NegBinParams, y: u64) -> f64 {
    (0..=y).map(|v| nb_pmf(params, v)).sum::<f64>().min(1.0)
}

/// Smallest `y` with `Pr(Y <= y) >= p`.
pub fn nb_quantile(params: &NegBinParams, p: f64) -> u64 {
    if params.is_degenerate() || p <= 0.0 {
        return 0;
    }
    let (mean, var) = nb_moments(params);
    // Past this point rounding, not probability mass, keeps the sum below p.
    let cap = (mean + 50.0 * var.sqrt() + 100.0).ceil() as u64;
    let mut cdf = 0.0;
    let mut y = 0;
    loop {
        cdf += nb_pmf(params, y);
        if cdf >= p || y >= cap {
            return y;
        }
        y += 1;
    }
}

/// Draws `λ ~ Gamma(r, rate q/(1−q))`, then `Y ~ Poisson(λ)`.
pub fn nb_sample<R: Rng + ?Sized>(params: &NegBinParams, rng: &mut R) -> u64 {
    if params.is_degenerate() {
        return 0;
    }
    let gamma = Gamma::new(params.r, 1.0 / params.gamma_rate()).expect("shape and scale are positive");
    let lambda: f64 = gamma.sample(rng);
    if lambda.is_nan() || lambda <= 0.0 {
        return 0;
    }
    match Poisson::new(lambda) {
        Ok(poisson) => poisson.sample(rng) as u64,
        Err(_) => lambda.round() as u64,
    }
}

/// Predictive distribution of one (day, series) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveCell {
    pub key: SeriesKey,
    pub day: usize,
    pub params: NegBinParams,
    pub y_obs: Option<u64>,
    pub y_hat: f64,
}

/// One cell per (day, series) of `point`: posterior where the day was
/// observed, prior otherwise. Cells are ordered by day, then series.
pub fn build_predictive_grid(point: &PointForecast, panel: &CountPanel) -> Result<Vec<PredictiveCell>> {
    if point.values.ncols() != panel.n_series() {
        return Err(Error::KeyMismatch(format!(
            "forecast has {} series, panel has {}",
            point.values.ncols(),
            panel.n_series()
        )));
    }
    let mut cells = Vec::with_capacity(point.values.len());
    for (row, (&day, &observed)) in point.days.iter().zip(&point.observed).enumerate() {
        if observed && day >= panel.n_days() {
            return Err(Error::InvalidArgument(format!(
                "observed day {day} outside panel of {} days",
                panel.n_days()
            )));
        }
        for (d, key) in panel.keys.iter().enumerate() {
            let y_hat = point.values[[row, d]];
            let (params, y_obs) = if observed {
                let y = panel.values[[day, d]];
                (posterior_predictive_params(y_hat, y)?, Some(y))
            } else {
                (prior_predictive_params(y_hat)?, None)
            };
            cells.push(PredictiveCell {
                key: key.clone(),
                day,
                params,
                y_obs,
                y_hat,
            });
        }
    }
    Ok(cells)
}
