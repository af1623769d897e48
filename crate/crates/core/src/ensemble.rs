//! Monte Carlo ensembles drawn from the predictive grid and the quantities
//! derived from them draw by draw.

use std::fmt;

use ndarray::{concatenate, s, Array2, Array3, Axis};

use crate::bayes::{nb_sample, PredictiveCell};
use crate::error::{Error, Result};
use crate::panel::Feature;
use crate::rng::{stream_rng, tag};

/// Scope code used for country-wide aggregates.
pub const NATIONAL_SCOPE: &str = "ES";

/// Column label of an ensemble: a region code (or [`NATIONAL_SCOPE`]) and a feature.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SeriesLabel {
    pub scope: String,
    pub feature: Feature,
}

impl SeriesLabel {
    pub fn new(scope: impl Into<String>, feature: Feature) -> Self {
        SeriesLabel {
            scope: scope.into(),
            feature,
        }
    }
}

impl fmt::Display for SeriesLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.scope, self.feature)
    }
}

/// Draws indexed `[draw, day, series]`.
///
/// Raw ensembles hold integer counts; cumulative paths and scenario
/// differences reuse the same layout with real values.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub days: Vec<usize>,
    pub series: Vec<SeriesLabel>,
    pub values: Array3<f64>,
}

impl Ensemble {
    pub fn n_draws(&self) -> usize {
        self.values.len_of(Axis(0))
    }

    pub fn series_index(&self, scope: &str, feature: Feature) -> Option<usize> {
        self.series
            .iter()
            .position(|l| l.scope == scope && l.feature == feature)
    }

    /// Keeps the series for which `keep` holds.
    pub fn filter_series(&self, keep: impl Fn(&SeriesLabel) -> bool) -> Ensemble {
        let idx: Vec<usize> = (0..self.series.len()).filter(|&i| keep(&self.series[i])).collect();
        Ensemble {
            days: self.days.clone(),
            series: idx.iter().map(|&i| self.series[i].clone()).collect(),
            values: self.values.select(Axis(2), &idx),
        }
    }

    /// Keeps days `>= first_day`.
    pub fn from_day(&self, first_day: usize) -> Ensemble {
        let start = self.days.iter().position(|&d| d >= first_day).unwrap_or(self.days.len());
        Ensemble {
            days: self.days[start..].to_vec(),
            series: self.series.clone(),
            values: self.values.slice(s![.., start.., ..]).to_owned(),
        }
    }

    /// Draw-matched `self − baseline`.
    pub fn difference(&self, baseline: &Ensemble) -> Result<Ensemble> {
        if self.days != baseline.days || self.series != baseline.series || self.values.dim() != baseline.values.dim() {
            return Err(Error::Shape("ensembles are not aligned".into()));
        }
        Ok(Ensemble {
            days: self.days.clone(),
            series: self.series.clone(),
            values: &self.values - &baseline.values,
        })
    }
}

/// Crude reproduction ratio per draw and day; `None` where undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct ReproductionSeries {
    pub scope: String,
    pub days: Vec<usize>,
    /// `[draw, day]`
    pub values: Array2<Option<f64>>,
}

/// Equal-tail band per (day, series).
#[derive(Debug, Clone, PartialEq)]
pub struct CredibleBand {
    pub level: f64,
    pub days: Vec<usize>,
    pub series: Vec<SeriesLabel>,
    /// `[day, series]`; NaN where no draw is defined.
    pub mean: Array2<f64>,
    pub lower: Array2<f64>,
    pub upper: Array2<f64>,
}

impl CredibleBand {
    /// Keeps the series for which `keep` holds, in order.
    pub fn filter_series(&self, keep: impl Fn(&SeriesLabel) -> bool) -> CredibleBand {
        let cols: Vec<usize> = (0..self.series.len()).filter(|&d| keep(&self.series[d])).collect();
        CredibleBand {
            level: self.level,
            days: self.days.clone(),
            series: cols.iter().map(|&d| self.series[d].clone()).collect(),
            mean: self.mean.select(Axis(1), &cols),
            lower: self.lower.select(Axis(1), &cols),
            upper: self.upper.select(Axis(1), &cols),
        }
    }
}

/// `n` draws for every cell of `grid`, each cell from its own stream.
///
/// The grid must cover a full (day x series) rectangle ordered by day, then
/// series, as produced by [`crate::bayes::build_predictive_grid`].
pub fn draw_ensemble(grid: &[PredictiveCell], n: usize, seed: u64) -> Result<Ensemble> {
    if n == 0 {
        return Err(Error::InvalidArgument("ensemble needs at least one draw".into()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty predictive grid".into()));
    }
    let first_day = grid[0].day;
    let n_series = grid.iter().take_while(|c| c.day == first_day).count();
    if !grid.len().is_multiple_of(n_series) {
        return Err(Error::Shape("predictive grid is not rectangular".into()));
    }
    let n_days = grid.len() / n_series;
    let series: Vec<SeriesLabel> = grid[..n_series]
        .iter()
        .map(|c| SeriesLabel::new(c.key.region.clone(), c.key.feature))
        .collect();
    let mut days = Vec::with_capacity(n_days);
    for chunk in grid.chunks(n_series) {
        let day = chunk[0].day;
        let aligned = chunk
            .iter()
            .zip(&grid[..n_series])
            .all(|(c, head)| c.day == day && c.key == head.key);
        if !aligned {
            return Err(Error::Shape(format!("predictive grid rows for day {day} are not aligned")));
        }
        days.push(day);
    }

    let mut values = Array3::zeros((n, n_days, n_series));
    for (idx, cell) in grid.iter().enumerate() {
        let (t, d) = (idx / n_series, idx % n_series);
        let mut rng = stream_rng(seed, &[tag::ENSEMBLE, cell.day as u64, cell.key.flat_index as u64]);
        for draw in 0..n {
            values[[draw, t, d]] = nb_sample(&cell.params, &mut rng) as f64;
        }
    }
    Ok(Ensemble { days, series, values })
}

/// Running sums over days plus a per-series starting total.
pub fn cumulative_paths(ens: &Ensemble, offset: &[f64]) -> Result<Ensemble> {
    if offset.len() != ens.series.len() {
        return Err(Error::Shape(format!(
            "{} offsets for {} series",
            offset.len(),
            ens.series.len()
        )));
    }
    let mut values = ens.values.clone();
    for mut draw in values.outer_iter_mut() {
        for (d, mut column) in draw.axis_iter_mut(Axis(1)).enumerate() {
            let mut total = offset[d];
            for v in column.iter_mut() {
                total += *v;
                *v = total;
            }
        }
    }
    Ok(Ensemble {
        days: ens.days.clone(),
        series: ens.series.clone(),
        values,
    })
}

/// Sum over regions per draw, day and feature.
pub fn aggregate_national(ens: &Ensemble) -> Ensemble {
    let features: Vec<Feature> = Feature::ALL
        .into_iter()
        .filter(|f| ens.series.iter().any(|l| l.feature == *f))
        .collect();
    let (n, t, _) = ens.values.dim();
    let mut values = Array3::zeros((n, t, features.len()));
    for (out_idx, feature) in features.iter().enumerate() {
        for (d, label) in ens.series.iter().enumerate() {
            if label.feature == *feature {
                let src = ens.values.slice(s![.., .., d]);
                let mut dst = values.slice_mut(s![.., .., out_idx]);
                dst += &src;
            }
        }
    }
    Ensemble {
        days: ens.days.clone(),
        series: features.into_iter().map(|f| SeriesLabel::new(NATIONAL_SCOPE, f)).collect(),
        values,
    }
}

/// Regional series followed by their national sums.
pub fn with_national(ens: &Ensemble) -> Result<Ensemble> {
    let national = aggregate_national(ens);
    let values = concatenate(Axis(2), &[ens.values.view(), national.values.view()])
        .map_err(|e| Error::Shape(e.to_string()))?;
    Ok(Ensemble {
        days: ens.days.clone(),
        series: ens.series.iter().chain(&national.series).cloned().collect(),
        values,
    })
}

/// Where the ratio is taken.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scope {
    Region(String),
    National,
}

impl Scope {
    pub fn code(&self) -> &str {
        match self {
            Scope::Region(r) => r,
            Scope::National => NATIONAL_SCOPE,
        }
    }
}

/// `R_t = cases_t / cases_{t−1}` per draw; undefined on the first day and
/// wherever the previous day has no cases.
pub fn crude_r(ens: &Ensemble, scope: &Scope) -> Result<ReproductionSeries> {
    let national;
    let (source, code) = match scope {
        Scope::National => {
            national = aggregate_national(ens);
            (&national, NATIONAL_SCOPE)
        }
        Scope::Region(r) => (ens, r.as_str()),
    };
    let d = source
        .series_index(code, Feature::Cases)
        .ok_or_else(|| Error::UnknownSeries {
            region: code.to_string(),
            feature: Feature::Cases.to_string(),
        })?;
    let cases = source.values.slice(s![.., .., d]);
    let (n, t) = cases.dim();
    let values = Array2::from_shape_fn((n, t), |(draw, day)| {
        if day == 0 {
            return None;
        }
        let prev = cases[[draw, day - 1]];
        (prev > 0.0).then(|| cases[[draw, day]] / prev)
    });
    Ok(ReproductionSeries {
        scope: code.to_string(),
        days: source.days.clone(),
        values,
    })
}

/// Nearest-rank empirical quantile of sorted data: the value at rank
/// `ceil(p·n)` (1-based).
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    // Tolerance keeps ranks like 0.025 × 1000 from rounding up to 26.
    let rank = ((p * n as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

/// Mean and equal-tail bounds of a set of draws; `None` if empty.
pub fn summarize(mut samples: Vec<f64>, level: f64) -> Option<(f64, f64, f64)> {
    if samples.is_empty() {
        return None;
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    samples.sort_by(f64::total_cmp);
    let lower = nearest_rank(&samples, (1.0 - level) / 2.0);
    let upper = nearest_rank(&samples, (1.0 + level) / 2.0);
    Some((mean, lower, upper))
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("band level must lie in (0, 1), got {level}")));
    }
    Ok(())
}

fn assemble(
    level: f64,
    days: Vec<usize>,
    series: Vec<SeriesLabel>,
    column: impl Fn(usize, usize) -> Vec<f64>,
) -> CredibleBand {
    let shape = (days.len(), series.len());
    let mut mean = Array2::from_elem(shape, f64::NAN);
    let mut lower = mean.clone();
    let mut upper = mean.clone();
    for t in 0..shape.0 {
        for d in 0..shape.1 {
            if let Some((m, lo, hi)) = summarize(column(t, d), level) {
                mean[[t, d]] = m;
                lower[[t, d]] = lo;
                upper[[t, d]] = hi;
            }
        }
    }
    CredibleBand {
        level,
        days,
        series,
        mean,
        lower,
        upper,
    }
}

/// Per (day, series): mean over draws and nearest-rank equal-tail bounds.
pub fn band(ens: &Ensemble, level: f64) -> Result<CredibleBand> {
    check_level(level)?;
    Ok(assemble(level, ens.days.clone(), ens.series.clone(), |t, d| {
        ens.values.slice(s![.., t, d]).to_vec()
    }))
}

/// Band over the defined ratios of each day.
pub fn band_r(series: &ReproductionSeries, level: f64) -> Result<CredibleBand> {
    check_level(level)?;
    Ok(assemble(
        level,
        series.days.clone(),
        vec![SeriesLabel::new(series.scope.clone(), Feature::Cases)],
        |t, _| series.values.column(t).iter().flatten().copied().collect(),
    ))
}
