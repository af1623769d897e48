use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use countcast_core::bayes::PredictiveCell;
use countcast_core::ensemble::{
    band, band_r, crude_r, with_national, CredibleBand, Ensemble, Scope, SeriesLabel, NATIONAL_SCOPE,
};
use countcast_core::ingest::parse_cumulative_csv;
use countcast_core::lstm::{train, BiLstmModel};
use countcast_core::panel::{to_daily_increments, CountPanel, Feature};
use countcast_core::pipeline::run_pipeline;
use countcast_core::report::{band_chart_svg, write_grid_csv, write_history_csv, BandTable, ChartPanel, Quantity};
use countcast_core::scenario::{run_scenario, ScenarioSpec};

use crate::config::RunConfig;
use crate::error::CliError;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn read_panel(path: &Path) -> Result<CountPanel, CliError> {
    Ok(CountPanel::read_csv(open(path)?)?)
}

/// Safe file-name fragment for a scope code.
fn file_stem(scope: &str) -> String {
    scope
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn day_labeler(panel: &CountPanel) -> impl Fn(usize) -> String + '_ {
    move |day| panel.date_of(day).to_string()
}

/// Reads the raw cumulative file and writes the daily panel plus a summary.
pub fn ingest(cfg: &RunConfig) -> Result<String, CliError> {
    let input = cfg
        .input
        .as_deref()
        .ok_or_else(|| CliError::Usage("config field `input` is required for ingest".into()))?;
    let cumulative = parse_cumulative_csv(open(input)?, &cfg.mapping)?;
    let daily = to_daily_increments(&cumulative);
    let mut w = create(&cfg.panel)?;
    daily.write_csv(&mut w)?;
    w.flush().map_err(|e| CliError::io(&cfg.panel, e))?;

    let summary = format!(
        "days = {}\nseries = {}\nregions = {}\nfirst_date = {}\nlast_date = {}\nclamped_negatives = {}\n",
        daily.n_days(),
        daily.n_series(),
        daily.regions().len(),
        daily.dates[0],
        daily.dates[daily.n_days() - 1],
        cumulative.negative_step_count()
    );
    write_text(&cfg.out.join("ingest_summary.txt"), &summary)?;
    Ok(summary)
}

pub fn train_model(cfg: &RunConfig) -> Result<String, CliError> {
    let panel = read_panel(&cfg.panel)?;
    let (model, history) = train(&panel, &cfg.train)?;
    let mut w = create(&cfg.model)?;
    model.write_to(&mut w)?;
    w.flush().map_err(|e| CliError::io(&cfg.model, e))?;
    let history_path = cfg.out.join("history.csv");
    let mut w = create(&history_path)?;
    write_history_csv(&history, &mut w)?;
    w.flush().map_err(|e| CliError::io(&history_path, e))?;
    let last = |v: &[f64]| v.last().map_or("n/a".to_string(), |x| format!("{x:.6}"));
    Ok(format!(
        "parameters = {}\nsteps = {}\nfinal_train_mae = {}\nfinal_val_mae = {}\n",
        model.count_parameters(),
        history.train_mae.len(),
        last(&history.train_mae),
        last(&history.val_mae)
    ))
}

/// Which scopes a run reports on.
struct ScopeFilter {
    regions: Option<Vec<String>>,
}

impl ScopeFilter {
    fn keeps(&self, scope: &str) -> bool {
        match &self.regions {
            None => true,
            Some(list) => list.iter().any(|r| r == scope),
        }
    }

    fn scopes(&self, panel: &CountPanel) -> Vec<Scope> {
        let mut out: Vec<Scope> = panel
            .regions()
            .into_iter()
            .filter(|r| self.keeps(r))
            .map(Scope::Region)
            .collect();
        if self.regions.is_none() {
            out.push(Scope::National);
        }
        out
    }

    fn check(&self, panel: &CountPanel) -> Result<(), CliError> {
        if let Some(list) = &self.regions {
            let known = panel.regions();
            if let Some(missing) = list.iter().find(|r| !known.contains(r)) {
                return Err(CliError::Usage(format!("field `regions`: `{missing}` is not in the panel")));
            }
        }
        Ok(())
    }

    /// Regional series of `ens` kept by the filter, plus national sums when unfiltered.
    fn select(&self, ens: &Ensemble) -> Result<Ensemble, CliError> {
        let full = if self.regions.is_none() { with_national(ens)? } else { ens.clone() };
        Ok(full.filter_series(|l| self.keeps(&l.scope) || (self.regions.is_none() && l.scope == NATIONAL_SCOPE)))
    }
}

/// Observed daily counts of one scope and feature.
fn observed_daily(panel: &CountPanel, scope: &str, feature: Feature) -> Option<Vec<f64>> {
    let cols: Vec<usize> = panel
        .keys
        .iter()
        .enumerate()
        .filter(|(_, k)| k.feature == feature && (scope == NATIONAL_SCOPE || k.region == scope))
        .map(|(i, _)| i)
        .collect();
    if cols.is_empty() {
        return None;
    }
    Some(
        (0..panel.n_days())
            .map(|t| cols.iter().map(|&d| panel.values[[t, d]] as f64).sum())
            .collect(),
    )
}

fn observed_points(panel: &CountPanel, scope: &str, feature: Feature, quantity: Quantity) -> Vec<(usize, f64)> {
    let Some(daily) = observed_daily(panel, scope, feature) else {
        return Vec::new();
    };
    match quantity {
        Quantity::Daily => daily.into_iter().enumerate().collect(),
        Quantity::Cumulative => daily
            .iter()
            .scan(0.0, |total, v| {
                *total += v;
                Some(*total)
            })
            .enumerate()
            .collect(),
        Quantity::R => (1..daily.len())
            .filter(|&t| daily[t - 1] > 0.0)
            .map(|t| (t, daily[t] / daily[t - 1]))
            .collect(),
    }
}

/// One stacked-panel chart per scope: one panel per feature in `band`.
fn scope_chart(
    panel: &CountPanel,
    band: &CredibleBand,
    scope: &str,
    quantity: Quantity,
    title: &str,
    with_observed: bool,
) -> Option<String> {
    let panels: Vec<ChartPanel> = band
        .series
        .iter()
        .enumerate()
        .filter(|(_, l)| l.scope == scope)
        .map(|(d, l)| {
            let mut p = ChartPanel::from_band(format!("{} {}", l.feature, quantity), band, d);
            if with_observed {
                p.observed = observed_points(panel, scope, l.feature, quantity);
            }
            p
        })
        .collect();
    if panels.is_empty() {
        return None;
    }
    Some(band_chart_svg(title, &panels, day_labeler(panel)))
}

fn write_grid(path: &Path, grid: &[PredictiveCell], filter: &ScopeFilter, panel: &CountPanel) -> Result<(), CliError> {
    let kept: Vec<PredictiveCell> = grid.iter().filter(|c| filter.keeps(&c.key.region)).cloned().collect();
    let mut w = create(path)?;
    write_grid_csv(&kept, day_labeler(panel), &mut w)?;
    w.flush().map_err(|e| CliError::io(path, e))
}

fn load_model(cfg: &RunConfig) -> Result<BiLstmModel, CliError> {
    Ok(BiLstmModel::read_from(open(&cfg.model)?)?)
}

/// Predictive grid, daily/cumulative/R bands and their charts.
pub fn predict(cfg: &RunConfig) -> Result<String, CliError> {
    let panel = read_panel(&cfg.panel)?;
    let model = load_model(cfg)?;
    let filter = ScopeFilter {
        regions: cfg.regions.clone(),
    };
    filter.check(&panel)?;
    let run = run_pipeline(&model, &panel, &cfg.pipeline_options())?;
    let labels = day_labeler(&panel);

    write_grid(&cfg.out.join("predictive_grid.csv"), &run.grid, &filter, &panel)?;

    let daily = band(&filter.select(&run.daily)?, cfg.level)?;
    let cumulative = band(&filter.select(&run.cumulative)?, cfg.level)?;
    let mut ratio_bands = Vec::new();
    for scope in filter.scopes(&panel) {
        if scope != Scope::National && panel.find(scope.code(), Feature::Cases).is_none() {
            continue;
        }
        ratio_bands.push((scope.clone(), band_r(&crude_r(&run.daily, &scope)?, cfg.level)?));
    }

    let bands_path = cfg.out.join("bands.csv");
    let mut table = BandTable::new(create(&bands_path)?)?;
    table.push(&daily, Quantity::Daily.as_str(), &labels)?;
    table.push(&cumulative, Quantity::Cumulative.as_str(), &labels)?;
    for (_, b) in &ratio_bands {
        table.push(b, Quantity::R.as_str(), &labels)?;
    }
    table.finish()?;

    let plots = cfg.out.join("plots");
    let mut n_plots = 0;
    for scope in filter.scopes(&panel) {
        let code = scope.code();
        for (quantity, b) in [(Quantity::Daily, &daily), (Quantity::Cumulative, &cumulative)] {
            let title = format!("{code}: {quantity} counts, {:.0}% band", cfg.level * 100.0);
            if let Some(svg) = scope_chart(&panel, b, code, quantity, &title, true) {
                write_text(&plots.join(format!("{}_{quantity}.svg", file_stem(code))), &svg)?;
                n_plots += 1;
            }
        }
        if let Some((_, b)) = ratio_bands.iter().find(|(s, _)| *s == scope) {
            let title = format!("{code}: crude R, {:.0}% band", cfg.level * 100.0);
            if let Some(svg) = scope_chart(&panel, b, code, Quantity::R, &title, true) {
                write_text(&plots.join(format!("{}_R.svg", file_stem(code))), &svg)?;
                n_plots += 1;
            }
        }
    }
    Ok(format!(
        "cells = {}\ndays = {}\ndraws = {}\nscopes = {}\nplots = {n_plots}\n",
        run.grid.len(),
        run.daily.days.len(),
        cfg.n_draws,
        filter.scopes(&panel).len()
    ))
}

pub fn load_scenario(path: &Path) -> Result<ScenarioSpec, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read scenario {}: {e}", path.display())))?;
    ScenarioSpec::parse(&text).map_err(|e| CliError::Usage(format!("scenario {}: {e}", path.display())))
}

/// Baseline, perturbed and difference bands from the start of the
/// perturbation window through the horizon.
pub fn scenario(cfg: &RunConfig, spec_path: Option<&Path>) -> Result<String, CliError> {
    let spec_path: PathBuf = spec_path
        .map(Path::to_path_buf)
        .or_else(|| cfg.scenario.clone())
        .ok_or_else(|| CliError::Usage("scenario needs --spec or config field `scenario`".into()))?;
    let spec = load_scenario(&spec_path)?;
    let panel = read_panel(&cfg.panel)?;
    let model = load_model(cfg)?;
    let filter = ScopeFilter {
        regions: cfg.regions.clone(),
    };
    filter.check(&panel)?;
    let impact = run_scenario(&model, &panel, &spec, &cfg.pipeline_options(), cfg.level)?;
    let labels = day_labeler(&panel);
    let dir = cfg.out.join(format!("scenario_{}", file_stem(&spec.label)));

    let mut w = create(&dir.join("perturbed_panel.csv"))?;
    impact.perturbed_panel.write_csv(&mut w)?;
    w.flush().map_err(|e| CliError::io(&dir, e))?;

    let keep = |l: &SeriesLabel| filter.keeps(&l.scope) || (filter.regions.is_none() && l.scope == NATIONAL_SCOPE);
    let restrict = |b: &CredibleBand| b.filter_series(keep);

    let mut baseline = BandTable::new(create(&dir.join("baseline_bands.csv"))?)?;
    let mut perturbed = BandTable::new(create(&dir.join("perturbed_bands.csv"))?)?;
    let mut difference = BandTable::new(create(&dir.join("difference_bands.csv"))?)?;
    let mut n_plots = 0;
    for impact_band in &impact.bands {
        let q = impact_band.quantity;
        let diff = restrict(&impact_band.difference);
        baseline.push(&restrict(&impact_band.baseline), q.as_str(), &labels)?;
        perturbed.push(&restrict(&impact_band.perturbed), q.as_str(), &labels)?;
        difference.push(&diff, &format!("delta_{q}"), &labels)?;
        for scope in filter.scopes(&panel) {
            let code = scope.code();
            let title = format!(
                "{}: change in {q} counts ({} x{} over {} days), {:.0}% band",
                code,
                spec.label,
                spec.daily_multiplier,
                spec.window_days,
                cfg.level * 100.0
            );
            if let Some(svg) = scope_chart(&panel, &diff, code, q, &title, false) {
                write_text(&dir.join("plots").join(format!("{}_delta_{q}.svg", file_stem(code))), &svg)?;
                n_plots += 1;
            }
        }
    }
    baseline.finish()?;
    perturbed.finish()?;
    difference.finish()?;

    let first = impact.first_day;
    Ok(format!(
        "label = {}\ntarget = {} {}\nfirst_day = {}\nplots = {n_plots}\noutput = {}\n",
        spec.label,
        spec.region,
        spec.feature,
        labels(first),
        dir.display()
    ))
}
