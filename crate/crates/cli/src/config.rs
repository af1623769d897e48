//! Run configuration: a flat `key = value` file plus command-line overrides.

use std::path::{Path, PathBuf};

use countcast_core::ingest::ColumnMapping;
use countcast_core::kv::KeyValues;
use countcast_core::lstm::TrainConfig;
use countcast_core::pipeline::PipelineOptions;

use crate::error::CliError;

const KEYS: &[&str] = &[
    "input",
    "panel",
    "model",
    "scenario",
    "seed",
    "steps",
    "batch_size",
    "validation_per_batch",
    "k",
    "hidden",
    "dropout",
    "recurrent_dropout",
    "learning_rate",
    "horizon",
    "n_draws",
    "level",
    "regions",
    "date_column",
    "region_column",
    "cases_column",
    "deaths_column",
    "recovered_column",
    "date_format",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Raw cumulative CSV read by `ingest`.
    pub input: Option<PathBuf>,
    /// Canonical daily panel; defaults to `<out>/panel.csv`.
    pub panel: PathBuf,
    /// Model file; defaults to `<out>/model.json`.
    pub model: PathBuf,
    pub scenario: Option<PathBuf>,
    pub out: PathBuf,
    pub train: TrainConfig,
    pub horizon: usize,
    pub n_draws: usize,
    pub level: f64,
    /// Restricts predict outputs to these regions and drops the national scope.
    pub regions: Option<Vec<String>>,
    pub mapping: ColumnMapping,
}

impl RunConfig {
    pub fn defaults(out: &Path) -> Self {
        let opts = PipelineOptions::default();
        RunConfig {
            input: None,
            panel: out.join("panel.csv"),
            model: out.join("model.json"),
            scenario: None,
            out: out.to_path_buf(),
            train: TrainConfig::default(),
            horizon: opts.horizon,
            n_draws: opts.n_draws,
            level: 0.95,
            regions: None,
            mapping: ColumnMapping::default(),
        }
    }

    /// Reads `text` over the defaults. Relative paths resolve against `base`.
    pub fn from_text(text: &str, base: &Path, out: &Path) -> Result<Self, CliError> {
        let kv = KeyValues::parse(text).map_err(CliError::config)?;
        kv.reject_unknown(KEYS).map_err(CliError::config)?;
        let mut cfg = RunConfig::defaults(out);
        let path = |key: &str| -> Result<Option<PathBuf>, CliError> {
            Ok(kv.get::<String>(key).map_err(CliError::config)?.map(|p| base.join(p)))
        };
        cfg.input = path("input")?;
        if let Some(p) = path("panel")? {
            cfg.panel = p;
        }
        if let Some(p) = path("model")? {
            cfg.model = p;
        }
        cfg.scenario = path("scenario")?;

        macro_rules! set {
            ($target:expr, $key:literal) => {
                if let Some(v) = kv.get($key).map_err(CliError::config)? {
                    $target = v;
                }
            };
        }
        set!(cfg.train.seed, "seed");
        set!(cfg.train.steps, "steps");
        set!(cfg.train.batch_size, "batch_size");
        set!(cfg.train.validation_per_batch, "validation_per_batch");
        set!(cfg.train.k, "k");
        set!(cfg.train.hidden, "hidden");
        set!(cfg.train.dropout, "dropout");
        set!(cfg.train.recurrent_dropout, "recurrent_dropout");
        set!(cfg.train.learning_rate, "learning_rate");
        set!(cfg.horizon, "horizon");
        set!(cfg.n_draws, "n_draws");
        set!(cfg.level, "level");
        set!(cfg.mapping.date, "date_column");
        set!(cfg.mapping.region, "region_column");
        set!(cfg.mapping.cases, "cases_column");
        set!(cfg.mapping.deaths, "deaths_column");
        set!(cfg.mapping.recovered, "recovered_column");
        cfg.mapping.date_format = kv.get("date_format").map_err(CliError::config)?;
        cfg.regions = kv.raw("regions").map(|raw| {
            raw.split(',')
                .map(str::trim)
                .filter(|r| !r.is_empty())
                .map(String::from)
                .collect()
        });
        Ok(cfg)
    }

    pub fn load(path: &Path, out: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_text(&text, base, out)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.train.validate().map_err(CliError::config)?;
        if self.n_draws == 0 {
            return Err(CliError::Usage("field `n_draws` must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CliError::Usage(format!("field `level` must lie in (0, 1), got {}", self.level)));
        }
        if matches!(&self.regions, Some(r) if r.is_empty()) {
            return Err(CliError::Usage("field `regions` lists no region".into()));
        }
        Ok(())
    }

    pub fn pipeline_options(&self) -> PipelineOptions {
        PipelineOptions {
            horizon: self.horizon,
            n_draws: self.n_draws,
            seed: self.train.seed,
        }
    }
}
