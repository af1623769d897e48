use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::weights::{parameter_count, BiLstmWeights};
use crate::error::{Error, Result};
use crate::normalize::NormalizationSpec;
use crate::panel::SeriesKey;

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    /// Samples per batch held out for the validation error.
    pub validation_per_batch: usize,
    /// Lookback window in days.
    pub k: usize,
    /// Hidden units per direction.
    pub hidden: usize,
    pub dropout: f64,
    pub recurrent_dropout: f64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 200,
            batch_size: 10,
            validation_per_batch: 2,
            k: 14,
            hidden: 32,
            dropout: 0.10,
            recurrent_dropout: 0.10,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.hidden == 0 {
            return bad("hidden must be at least 1".into());
        }
        if self.batch_size == 0 || self.validation_per_batch >= self.batch_size {
            return bad(format!(
                "validation_per_batch ({}) must be below batch_size ({})",
                self.validation_per_batch, self.batch_size
            ));
        }
        for (name, rate) in [("dropout", self.dropout), ("recurrent_dropout", self.recurrent_dropout)] {
            if !(0.0..1.0).contains(&rate) {
                return bad(format!("{name} must lie in [0, 1), got {rate}"));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        Ok(())
    }
}

/// A trained (or freshly initialized) network with everything needed to
/// turn count panels into forecasts.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmModel {
    pub weights: BiLstmWeights,
    pub norm: NormalizationSpec,
    pub keys: Vec<SeriesKey>,
    pub config: TrainConfig,
}

impl BiLstmModel {
    pub fn n_series(&self) -> usize {
        self.keys.len()
    }

    pub fn lookback(&self) -> usize {
        self.config.k
    }

    pub fn hidden(&self) -> usize {
        self.weights.hidden()
    }

    pub fn count_parameters(&self) -> usize {
        parameter_count(self.n_series(), self.hidden())
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let file = ModelFile::from_model(self);
        let text = serde_json::to_string(&file).map_err(|e| Error::ModelFormat(e.to_string()))?;
        out.write_all(text.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| Error::io("model", e))
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(input).map_err(|e| Error::ModelFormat(e.to_string()))?;
        file.into_model()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

const FORMAT_NAME: &str = "countcast-bilstm";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct StoredBlock {
    name: String,
    rows: usize,
    cols: usize,
    /// Row-major.
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    n_series: usize,
    hidden: usize,
    lookback: usize,
    keys: Vec<SeriesKey>,
    normalization: NormalizationSpec,
    config: TrainConfig,
    blocks: Vec<StoredBlock>,
}

impl ModelFile {
    fn from_model(model: &BiLstmModel) -> Self {
        ModelFile {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            n_series: model.n_series(),
            hidden: model.hidden(),
            lookback: model.lookback(),
            keys: model.keys.clone(),
            normalization: model.norm.clone(),
            config: model.config.clone(),
            blocks: model
                .weights
                .blocks()
                .into_iter()
                .map(|b| StoredBlock {
                    name: b.name,
                    rows: b.shape.0,
                    cols: b.shape.1,
                    data: b.data.to_vec(),
                })
                .collect(),
        }
    }

    fn into_model(self) -> Result<BiLstmModel> {
        let bad = |msg: String| Err(Error::ModelFormat(msg));
        if self.format != FORMAT_NAME || self.version != FORMAT_VERSION {
            return bad(format!("unsupported format {} v{}", self.format, self.version));
        }
        if self.n_series == 0 || self.hidden == 0 || self.lookback == 0 {
            return bad("dimensions must be positive".into());
        }
        if self.keys.len() != self.n_series
            || self.normalization.location.len() != self.n_series
            || self.normalization.scale.len() != self.n_series
        {
            return bad("series metadata does not match n_series".into());
        }
        if self.lookback != self.config.k || self.hidden != self.config.hidden {
            return bad("config disagrees with stored dimensions".into());
        }
        let mut weights = BiLstmWeights::zeros(self.n_series, self.hidden);
        let targets = weights.blocks_mut();
        if targets.len() != self.blocks.len() {
            return bad(format!("expected {} weight blocks, found {}", targets.len(), self.blocks.len()));
        }
        for (dst, src) in targets.into_iter().zip(self.blocks) {
            if dst.name != src.name || dst.shape != (src.rows, src.cols) || src.data.len() != dst.data.len() {
                return bad(format!(
                    "block {} ({}x{}) does not match expected {} {:?}",
                    src.name, src.rows, src.cols, dst.name, dst.shape
                ));
            }
            dst.data.copy_from_slice(&src.data);
        }
        weights.check_finite("stored weights")?;
        Ok(BiLstmModel {
            weights,
            norm: self.normalization,
            keys: self.keys,
            config: self.config,
        })
    }
}

/// Point guesses on the count scale, one row per day.
#[derive(Debug, Clone, PartialEq)]
pub struct PointForecast {
    pub days: Vec<usize>,
    /// |days| x D, all >= 0.
    pub values: Array2<f64>,
    pub observed: Vec<bool>,
}

impl PointForecast {
    pub fn empty(n_series: usize) -> Self {
        PointForecast {
            days: Vec::new(),
            values: Array2::zeros((0, n_series)),
            observed: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &PointForecast) -> Result<PointForecast> {
        if self.values.ncols() != other.values.ncols() {
            return Err(Error::Shape("forecasts have different widths".into()));
        }
        let values = ndarray::concatenate(ndarray::Axis(0), &[self.values.view(), other.values.view()])
            .map_err(|e| Error::Shape(e.to_string()))?;
        Ok(PointForecast {
            days: self.days.iter().chain(&other.days).copied().collect(),
            values,
            observed: self.observed.iter().chain(&other.observed).copied().collect(),
        })
    }

    pub fn row(&self, i: usize) -> Array1<f64> {
        self.values.row(i).to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::Feature;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> BiLstmModel {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let config = TrainConfig {
            k: 3,
            hidden: 2,
            ..TrainConfig::default()
        };
        BiLstmModel {
            weights: BiLstmWeights::init(2, 2, &mut rng),
            norm: NormalizationSpec {
                location: vec![0.1, 1.0 / 3.0],
                scale: vec![1e-6, 2.5],
            },
            keys: vec![
                SeriesKey::new("MD", Feature::Cases, 0),
                SeriesKey::new("MD", Feature::Deaths, 1),
            ],
            config,
        }
    }

    #[test]
    fn save_load_is_bit_exact() {
        let m = model();
        let mut first = Vec::new();
        m.write_to(&mut first).unwrap();
        let back = BiLstmModel::read_from(first.as_slice()).unwrap();
        for (a, b) in m.weights.blocks().iter().zip(back.weights.blocks()) {
            let bits_a: Vec<u64> = a.data.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.data.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b, "{}", a.name);
        }
        assert_eq!(back, m);
        let mut second = Vec::new();
        back.write_to(&mut second).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn rejects_tampered_shapes() {
        let m = model();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("\"hidden\":2,\"lookback\"", "\"hidden\":3,\"lookback\"");
        assert!(matches!(BiLstmModel::read_from(text.as_bytes()), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn config_defaults() {
        let c = TrainConfig::default();
        assert_eq!((c.steps, c.batch_size, c.validation_per_batch, c.k, c.hidden), (200, 10, 2, 14, 32));
        assert_eq!((c.dropout, c.recurrent_dropout, c.learning_rate), (0.10, 0.10, 1e-3));
        assert!(c.validate().is_ok());
        assert!(TrainConfig { hidden: 0, ..c.clone() }.validate().is_err());
        assert!(TrainConfig { validation_per_batch: 10, ..c }.validate().is_err());
    }
}
