//! Table and chart output.

use std::fmt::{self, Write as _};
use std::io::Write;

use crate::bayes::{nb_moments, PredictiveCell};
use crate::ensemble::CredibleBand;
use crate::error::{Error, Result};
use crate::lstm::TrainHistory;

/// What a band describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Daily,
    Cumulative,
    R,
}

impl Quantity {
    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::Daily => "daily",
            Quantity::Cumulative => "cumulative",
            Quantity::R => "R",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv write: {e}"))
}

fn flush<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv write: {e}")))?
        .flush()
        .map_err(|e| Error::io("csv output", e))
}

/// `step,train_mae,val_mae` with 1-based steps.
pub fn write_history_csv<W: Write>(history: &TrainHistory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "train_mae", "val_mae"]).map_err(csv_err)?;
    for (i, (tr, va)) in history.train_mae.iter().zip(&history.val_mae).enumerate() {
        w.write_record([(i + 1).to_string(), tr.to_string(), va.to_string()])
            .map_err(csv_err)?;
    }
    flush(w)
}

/// `day,region,feature,flavor,r,q,mean,var,y_obs`; `y_obs` empty when unobserved.
pub fn write_grid_csv<W: Write>(grid: &[PredictiveCell], day_label: impl Fn(usize) -> String, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["day", "region", "feature", "flavor", "r", "q", "mean", "var", "y_obs"])
        .map_err(csv_err)?;
    for cell in grid {
        let (mean, var) = nb_moments(&cell.params);
        w.write_record([
            day_label(cell.day),
            cell.key.region.clone(),
            cell.key.feature.to_string(),
            cell.params.flavor.to_string(),
            cell.params.r.to_string(),
            cell.params.q.to_string(),
            mean.to_string(),
            var.to_string(),
            cell.y_obs.map(|y| y.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    flush(w)
}

pub const BAND_HEADER: [&str; 8] = ["day", "scope", "feature", "quantity", "mean", "lower", "upper", "level"];

/// Accumulates rows of the band table.
pub struct BandTable<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> BandTable<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(BAND_HEADER).map_err(csv_err)?;
        Ok(BandTable { writer })
    }

    /// Rows for every (day, series) of `band`, day-major.
    pub fn push(&mut self, band: &CredibleBand, quantity: &str, day_label: &impl Fn(usize) -> String) -> Result<()> {
        for (t, &day) in band.days.iter().enumerate() {
            let label = day_label(day);
            for (d, series) in band.series.iter().enumerate() {
                self.writer
                    .write_record([
                        label.clone(),
                        series.scope.clone(),
                        series.feature.to_string(),
                        quantity.to_string(),
                        band.mean[[t, d]].to_string(),
                        band.lower[[t, d]].to_string(),
                        band.upper[[t, d]].to_string(),
                        band.level.to_string(),
                    ])
                    .map_err(csv_err)?;
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        flush(self.writer)
    }
}

/// One panel of a chart: a band over days plus optional observed points.
#[derive(Debug, Clone, Default)]
pub struct ChartPanel {
    pub title: String,
    pub days: Vec<usize>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub observed: Vec<(usize, f64)>,
}

impl ChartPanel {
    /// Column `series` of `band`.
    pub fn from_band(title: impl Into<String>, band: &CredibleBand, series: usize) -> Self {
        ChartPanel {
            title: title.into(),
            days: band.days.clone(),
            mean: band.mean.column(series).to_vec(),
            lower: band.lower.column(series).to_vec(),
            upper: band.upper.column(series).to_vec(),
            observed: Vec::new(),
        }
    }
}

const WIDTH: f64 = 860.0;
const PANEL_HEIGHT: f64 = 250.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 34.0;
const MARGIN_BOTTOM: f64 = 40.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 1e4 {
        format!("{v:.0}")
    } else if v.abs() >= 10.0 || v == 0.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

/// Static SVG with stacked panels: shaded band, mean line, observed points.
pub fn band_chart_svg(title: &str, panels: &[ChartPanel], day_label: impl Fn(usize) -> String) -> String {
    let height = MARGIN_TOP + PANEL_HEIGHT * panels.len().max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    for (i, panel) in panels.iter().enumerate() {
        draw_panel(&mut s, panel, MARGIN_TOP + PANEL_HEIGHT * i as f64, &day_label);
    }
    s.push_str("</svg>\n");
    s
}

fn draw_panel(s: &mut String, panel: &ChartPanel, top: f64, day_label: &impl Fn(usize) -> String) {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = top + PANEL_HEIGHT - MARGIN_BOTTOM;
    let y1 = top + 18.0;

    let day_iter = panel.days.iter().chain(panel.observed.iter().map(|(d, _)| d));
    let (dmin, dmax) = day_iter.fold((usize::MAX, 0), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    let finite = panel
        .lower
        .iter()
        .chain(&panel.upper)
        .chain(&panel.mean)
        .chain(panel.observed.iter().map(|(_, v)| v))
        .copied()
        .filter(|v| v.is_finite());
    let (mut vmin, mut vmax) = finite.fold((0.0f64, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if vmax - vmin < 1e-9 {
        vmax = vmin + 1.0;
    }
    let pad = 0.05 * (vmax - vmin);
    vmax += pad;
    if vmin < 0.0 {
        vmin -= pad;
    }
    let span_days = (dmax.saturating_sub(dmin)).max(1) as f64;
    let px = |d: usize| x0 + (d.saturating_sub(dmin)) as f64 / span_days * (x1 - x0);
    let py = |v: f64| y0 - (v - vmin) / (vmax - vmin) * (y0 - y1);

    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" font-weight="bold">{}</text>"#,
        x0,
        y1 - 4.0,
        escape(&panel.title)
    );
    let _ = writeln!(
        s,
        r#"<path d="M{x0:.1},{y1:.1} L{x0:.1},{y0:.1} L{x1:.1},{y0:.1}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let v = vmin + (vmax - vmin) * i as f64 / 4.0;
        let y = py(v);
        let _ = writeln!(
            s,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{x1:.1}" y2="{y:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            x0,
            x0 - 6.0,
            y + 4.0,
            tick_label(v)
        );
    }
    if dmin <= dmax {
        let step = ((dmax - dmin) / 6).max(1);
        let mut d = dmin;
        while d <= dmax {
            let x = px(d);
            let _ = writeln!(
                s,
                r#"<line x1="{x:.1}" y1="{y0:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                y0 + 4.0,
                y0 + 16.0,
                escape(&day_label(d))
            );
            d += step;
        }
    }

    let defined: Vec<usize> = (0..panel.days.len())
        .filter(|&i| panel.lower[i].is_finite() && panel.upper[i].is_finite())
        .collect();
    if !defined.is_empty() {
        let mut pts = String::new();
        for &i in &defined {
            let _ = write!(pts, "{:.2},{:.2} ", px(panel.days[i]), py(panel.upper[i]));
        }
        for &i in defined.iter().rev() {
            let _ = write!(pts, "{:.2},{:.2} ", px(panel.days[i]), py(panel.lower[i]));
        }
        let _ = writeln!(
            s,
            r##"<polygon points="{}" fill="#9ecae1" fill-opacity="0.6" stroke="#e6b800" stroke-width="0.8"/>"##,
            pts.trim_end()
        );
    }
    let mean_pts: Vec<String> = (0..panel.days.len())
        .filter(|&i| panel.mean[i].is_finite())
        .map(|i| format!("{:.2},{:.2}", px(panel.days[i]), py(panel.mean[i])))
        .collect();
    if !mean_pts.is_empty() {
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#08519c" stroke-width="1.5"/>"##,
            mean_pts.join(" ")
        );
    }
    for &(d, v) in panel.observed.iter().filter(|(_, v)| v.is_finite()) {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="2.2" fill="#d62728"/>"##,
            px(d),
            py(v)
        );
    }
}
