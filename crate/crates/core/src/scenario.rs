//! Counterfactual perturbations of observed history and their effect on the
//! predictive ensembles.

use crate::ensemble::{band, with_national, CredibleBand};
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::lstm::BiLstmModel;
use crate::panel::{CountPanel, Feature};
use crate::pipeline::{run_pipeline, PipelineOptions, PipelineRun};
use crate::report::Quantity;

/// Multiplies the last `window_days` observed days of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub region: String,
    pub feature: Feature,
    pub window_days: usize,
    pub daily_multiplier: f64,
    /// Day `i` of the window (1-based) is scaled by `multiplier^i` when set,
    /// by `multiplier` otherwise.
    pub compound: bool,
    pub label: String,
}

impl ScenarioSpec {
    pub const FIELDS: [&'static str; 6] = ["region", "feature", "window_days", "daily_multiplier", "compound", "label"];

    pub fn validate(&self) -> Result<()> {
        if self.window_days == 0 {
            return Err(Error::InvalidArgument("field `window_days` must be at least 1".into()));
        }
        if !(self.daily_multiplier > 0.0 && self.daily_multiplier.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "field `daily_multiplier` must be finite and positive, got {}",
                self.daily_multiplier
            )));
        }
        if self.region.is_empty() {
            return Err(Error::InvalidArgument("field `region` is empty".into()));
        }
        Ok(())
    }

    /// Reads the key-value scenario file format.
    pub fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        kv.reject_unknown(&Self::FIELDS)?;
        let feature = match kv.raw("feature") {
            None => Feature::Cases,
            Some(raw) => raw
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("field `feature`: unknown value `{raw}`")))?,
        };
        let region: String = kv.require("region")?;
        let spec = ScenarioSpec {
            label: kv.get("label")?.unwrap_or_else(|| format!("{region}-{feature}")),
            region,
            feature,
            window_days: kv.require("window_days")?,
            daily_multiplier: kv.require("daily_multiplier")?,
            compound: kv.get("compound")?.unwrap_or(true),
        };
        spec.validate()?;
        Ok(spec)
    }

    fn factor(&self, rank: usize) -> f64 {
        if self.compound {
            self.daily_multiplier.powi(rank as i32)
        } else {
            self.daily_multiplier
        }
    }
}

/// Rescales the target series over the window, rounding half up; every other
/// cell is copied unchanged.
pub fn apply_scenario(panel: &CountPanel, spec: &ScenarioSpec) -> Result<CountPanel> {
    spec.validate()?;
    let d = panel
        .find(&spec.region, spec.feature)
        .ok_or_else(|| Error::UnknownSeries {
            region: spec.region.clone(),
            feature: spec.feature.to_string(),
        })?;
    let t = panel.n_days();
    if spec.window_days > t {
        return Err(Error::InvalidArgument(format!(
            "scenario window of {} days exceeds {t} observed days",
            spec.window_days
        )));
    }
    let mut out = panel.clone();
    for (rank, day) in (t - spec.window_days..t).enumerate() {
        let y = panel.values[[day, d]] as f64;
        out.values[[day, d]] = (y * spec.factor(rank + 1) + 0.5).floor() as u64;
    }
    Ok(out)
}

/// Baseline, perturbed and draw-matched difference bands for one quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactBands {
    pub quantity: Quantity,
    pub baseline: CredibleBand,
    pub perturbed: CredibleBand,
    pub difference: CredibleBand,
}

#[derive(Debug, Clone)]
pub struct ScenarioImpact {
    pub spec: ScenarioSpec,
    /// First day covered by the bands: the start of the scenario window.
    pub first_day: usize,
    pub perturbed_panel: CountPanel,
    pub baseline: PipelineRun,
    pub perturbed: PipelineRun,
    /// Regional series followed by the national aggregate.
    pub bands: Vec<ImpactBands>,
}

/// Runs the pipeline on `panel` and on its perturbed copy with the same
/// seed, so every cell draws from the same stream in both runs.
pub fn run_scenario(
    model: &BiLstmModel,
    panel: &CountPanel,
    spec: &ScenarioSpec,
    opts: &PipelineOptions,
    level: f64,
) -> Result<ScenarioImpact> {
    let perturbed_panel = apply_scenario(panel, spec)?;
    let baseline = run_pipeline(model, panel, opts)?;
    let perturbed = run_pipeline(model, &perturbed_panel, opts)?;
    let first_day = panel.n_days() - spec.window_days;

    let mut bands = Vec::new();
    for (quantity, base, pert) in [
        (Quantity::Daily, &baseline.daily, &perturbed.daily),
        (Quantity::Cumulative, &baseline.cumulative, &perturbed.cumulative),
    ] {
        let base = with_national(base)?.from_day(first_day);
        let pert = with_national(pert)?.from_day(first_day);
        let diff = pert.difference(&base)?;
        bands.push(ImpactBands {
            quantity,
            baseline: band(&base, level)?,
            perturbed: band(&pert, level)?,
            difference: band(&diff, level)?,
        });
    }
    Ok(ScenarioImpact {
        spec: spec.clone(),
        first_day,
        perturbed_panel,
        baseline,
        perturbed,
        bands,
    })
}
