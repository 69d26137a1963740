//! Lower/median/upper quantile ensembles for one horizon.

mod modelfile;

pub use modelfile::{load_ensemble, read_ensemble, save_ensemble, write_ensemble, FORMAT_VERSION, MAGIC};

use std::collections::BTreeMap;
use std::io::Write;

use sha2::{Digest, Sha256};

use crate::dataset::{Horizon, SupervisedDataset, TARGET_COUNT};
use crate::neural::{self, ModelConfig, NeuralError, TrainConfig, TrainedModel};

#[derive(Debug, thiserror::Error)]
pub enum ForecastError {
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("model file checksum mismatch (corrupted or truncated)")]
    Checksum,
    #[error("corrupted model file: {0}")]
    Corrupt(String),
    #[error("horizon mismatch: ensemble is {ensemble} s, data is {data} s")]
    HorizonMismatch { ensemble: u64, data: u64 },
    #[error("invalid quantile levels: {0}")]
    Levels(String),
    #[error("empty forecast series")]
    Empty,
}

/// Which member of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantile {
    Lower,
    Median,
    Upper,
}

impl Quantile {
    pub const ALL: [Quantile; 3] = [Quantile::Lower, Quantile::Median, Quantile::Upper];

    /// Short column label: L, M or U.
    pub fn label(self) -> &'static str {
        match self {
            Quantile::Lower => "L",
            Quantile::Median => "M",
            Quantile::Upper => "U",
        }
    }
}

impl std::str::FromStr for Quantile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l" | "lower" | "lo" => Ok(Quantile::Lower),
            "m" | "median" | "med" => Ok(Quantile::Median),
            "u" | "upper" | "hi" => Ok(Quantile::Upper),
            other => Err(format!("unknown quantile `{other}` (expected lower, median or upper)")),
        }
    }
}

/// Quantile levels of the three members. The median is always 0.5.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileLevels {
    pub lower: f64,
    pub upper: f64,
}

impl Default for QuantileLevels {
    fn default() -> Self {
        Self { lower: 0.05, upper: 0.95 }
    }
}

impl QuantileLevels {
    pub fn new(lower: f64, upper: f64) -> Result<Self, ForecastError> {
        if !(0.0 < lower && lower < 0.5 && 0.5 < upper && upper < 1.0) {
            return Err(ForecastError::Levels(format!("need 0 < {lower} < 0.5 < {upper} < 1")));
        }
        Ok(Self { lower, upper })
    }

    pub fn alpha(&self, q: Quantile) -> f64 {
        match q {
            Quantile::Lower => self.lower,
            Quantile::Median => 0.5,
            Quantile::Upper => self.upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileEnsemble {
    pub horizon: Horizon,
    pub lower: TrainedModel,
    pub median: TrainedModel,
    pub upper: TrainedModel,
    /// Hex digest of the training windows.
    pub fingerprint: String,
    /// Free-form key/value pairs stored with the model, e.g. the run configuration.
    pub metadata: BTreeMap<String, String>,
}

impl QuantileEnsemble {
    pub fn model(&self, q: Quantile) -> &TrainedModel {
        match q {
            Quantile::Lower => &self.lower,
            Quantile::Median => &self.median,
            Quantile::Upper => &self.upper,
        }
    }

    pub fn levels(&self) -> QuantileLevels {
        QuantileLevels { lower: self.lower.config.quantile, upper: self.upper.config.quantile }
    }
}

/// SHA-256 over the horizon and every window's inputs, target and start time.
pub fn fingerprint(data: &SupervisedDataset) -> String {
    let mut h = Sha256::new();
    h.update(data.horizon.seconds().to_le_bytes());
    for w in &data.windows {
        for v in w.flat_inputs().iter().chain(&w.target) {
            h.update(v.to_le_bytes());
        }
        h.update(w.target_interval_start.to_le_bytes());
    }
    h.finalize()[..16].iter().map(|b| format!("{b:02x}")).collect()
}

/// Trains the (0.05, 0.5, 0.95) ensemble; seeds are `seed`, `seed + 1`, `seed + 2`.
pub fn train_ensemble(
    train: &SupervisedDataset,
    val: &SupervisedDataset,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<QuantileEnsemble, ForecastError> {
    train_ensemble_with_levels(train, val, model_config, train_config, QuantileLevels::default())
}

pub fn train_ensemble_with_levels(
    train: &SupervisedDataset,
    val: &SupervisedDataset,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    levels: QuantileLevels,
) -> Result<QuantileEnsemble, ForecastError> {
    if train.horizon != val.horizon {
        return Err(ForecastError::HorizonMismatch { ensemble: train.horizon.seconds(), data: val.horizon.seconds() });
    }
    let configs = Quantile::ALL.map(|q| ModelConfig {
        quantile: levels.alpha(q),
        seed: model_config.seed.wrapping_add(q as u64),
        ..*model_config
    });
    // Members share nothing mutable, so they can train concurrently without
    // affecting the result.
    let results: Vec<Result<TrainedModel, NeuralError>> = std::thread::scope(|s| {
        let handles: Vec<_> =
            configs.iter().map(|c| s.spawn(move || neural::train(train, val, c, train_config))).collect();
        handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
    });
    let mut models = results.into_iter();
    let mut next = || models.next().expect("three members");
    Ok(QuantileEnsemble {
        horizon: train.horizon,
        lower: next()?,
        median: next()?,
        upper: next()?,
        fingerprint: fingerprint(train),
        metadata: BTreeMap::new(),
    })
}

/// Forecasts from all three members for one target interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileForecast {
    pub target_interval_start: f64,
    /// Voltage, current, power.
    pub lower: [f64; TARGET_COUNT],
    pub median: [f64; TARGET_COUNT],
    pub upper: [f64; TARGET_COUNT],
    /// Ground truth for the interval.
    pub actual: [f64; TARGET_COUNT],
}

impl QuantileForecast {
    pub fn get(&self, q: Quantile) -> &[f64; TARGET_COUNT] {
        match q {
            Quantile::Lower => &self.lower,
            Quantile::Median => &self.median,
            Quantile::Upper => &self.upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSeries {
    pub horizon: Horizon,
    pub forecasts: Vec<QuantileForecast>,
}

impl ForecastSeries {
    pub fn len(&self) -> usize {
        self.forecasts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forecasts.is_empty()
    }

    /// One output (0 voltage, 1 current, 2 power) of one member across the series.
    pub fn column(&self, q: Quantile, output: usize) -> Vec<f64> {
        self.forecasts.iter().map(|f| f.get(q)[output]).collect()
    }

    pub fn actual_column(&self, output: usize) -> Vec<f64> {
        self.forecasts.iter().map(|f| f.actual[output]).collect()
    }

    pub fn actuals(&self) -> Vec<[f64; TARGET_COUNT]> {
        self.forecasts.iter().map(|f| f.actual).collect()
    }

    pub fn interval_starts(&self) -> Vec<f64> {
        self.forecasts.iter().map(|f| f.target_interval_start).collect()
    }

    /// Plot-data export. `header` lines are written first, each prefixed with `# `.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[String]) -> std::io::Result<()> {
        for line in header {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "interval_start,v_lo,v_med,v_hi,i_lo,i_med,i_hi,p_lo,p_med,p_hi,v_true,i_true,p_true")?;
        for f in &self.forecasts {
            write!(out, "{}", f.target_interval_start)?;
            for k in 0..TARGET_COUNT {
                write!(out, ",{},{},{}", f.lower[k], f.median[k], f.upper[k])?;
            }
            for a in f.actual {
                write!(out, ",{a}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Runs every member over the test windows, in order.
pub fn forecast_series(ensemble: &QuantileEnsemble, test: &SupervisedDataset) -> Result<ForecastSeries, ForecastError> {
    if ensemble.horizon != test.horizon {
        return Err(ForecastError::HorizonMismatch {
            ensemble: ensemble.horizon.seconds(),
            data: test.horizon.seconds(),
        });
    }
    let lower = ensemble.lower.predict_batch(&test.windows)?;
    let median = ensemble.median.predict_batch(&test.windows)?;
    let upper = ensemble.upper.predict_batch(&test.windows)?;
    let forecasts = test
        .windows
        .iter()
        .enumerate()
        .map(|(i, w)| QuantileForecast {
            target_interval_start: w.target_interval_start,
            lower: lower[i],
            median: median[i],
            upper: upper[i],
            actual: w.target,
        })
        .collect();
    Ok(ForecastSeries { horizon: test.horizon, forecasts })
}

/// Per output, the fraction of forecasts where `lower > median` or `median > upper`.
/// Ties are not crossings.
pub fn quantile_crossing_rate(series: &ForecastSeries) -> Result<[f64; TARGET_COUNT], ForecastError> {
    if series.is_empty() {
        return Err(ForecastError::Empty);
    }
    let mut crossed = [0usize; TARGET_COUNT];
    for f in &series.forecasts {
        for k in 0..TARGET_COUNT {
            if f.lower[k] > f.median[k] || f.median[k] > f.upper[k] {
                crossed[k] += 1;
            }
        }
    }
    Ok(crossed.map(|c| c as f64 / series.len() as f64))
}
