//! Trace ingestion, resampling, supervised windowing and chronological splits.
//!
//! The flow is `parse_samples -> sanitize -> resample -> build_supervised`,
//! followed by either [`split_chrono`] for a single train/val/test run or
//! [`tscv_folds`] for walk-forward cross-validation.

mod ingest;
mod resample;
mod split;
mod window;

pub use ingest::{
    find_gaps, parse_samples, parse_timestamp, read_samples_file, sanitize, write_samples, Gap, ParseReport,
    SanitizeReport, NOMINAL_MAX_GAP_SECS,
};
pub use resample::{resample, FeatureMeans, Interval, ResampledSeries};
pub use split::{split_chrono, tscv_folds, ChronoSplit, Fold, SplitSpec};
pub use window::{
    build_supervised, SupervisedDataset, SupervisedWindow, WindowReport, FEATURE_COUNT, FEATURE_NAMES, SEQUENCE_LENGTH,
    TARGET_COUNT, TARGET_NAMES,
};

use std::fmt;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("no samples")]
    NoSamples,
    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("failed to read trace: {0}")]
    Read(String),
    #[error("invalid timestamp `{0}`")]
    InvalidTimestamp(String),
    #[error("deployment start {deployment_start} is after the first sample at {first_sample}")]
    DeploymentAfterFirstSample { deployment_start: f64, first_sample: f64 },
    #[error("timestamps must be strictly increasing (record {index})")]
    NotIncreasing { index: usize },
    #[error("series empty after sanitization")]
    EmptyAfterSanitize,
    #[error("unsupported horizon {0} s; supported values are 180, 300, 900, 1800, 3600")]
    UnsupportedHorizon(u64),
    #[error("insufficient history: {usable} usable windows, need at least one run of 5 consecutive intervals")]
    InsufficientHistory { usable: usize },
    #[error("invalid split fractions: {0}")]
    InvalidSplit(String),
    #[error("{0} slice is empty")]
    EmptySlice(&'static str),
    #[error("dataset of {0} windows is too small for 4 walk-forward folds (need at least 10)")]
    TooSmallForFolds(usize),
}

/// One raw reading from the cell and the soil sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRecord {
    /// UTC epoch seconds.
    pub timestamp: f64,
    /// Volts.
    pub voltage: f64,
    /// Amperes.
    pub current: f64,
    /// Watts.
    pub power: f64,
    /// Soil electrical conductivity, µS/cm.
    pub electrical_conductivity: f64,
    /// Degrees Celsius.
    pub soil_temperature: f64,
    /// Raw volumetric water content counts.
    pub volumetric_water_content: f64,
}

/// Timestamp-ordered raw records of one deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSeries {
    records: Vec<SampleRecord>,
    deployment_start: f64,
}

impl SampleSeries {
    /// Builds a series, checking strict timestamp order and that the
    /// deployment started no later than the first record.
    pub fn new(records: Vec<SampleRecord>, deployment_start: f64) -> Result<Self, DatasetError> {
        if let Some(first) = records.first() {
            if deployment_start > first.timestamp {
                return Err(DatasetError::DeploymentAfterFirstSample {
                    deployment_start,
                    first_sample: first.timestamp,
                });
            }
        }
        if let Some(i) = records.windows(2).position(|w| w[1].timestamp <= w[0].timestamp) {
            return Err(DatasetError::NotIncreasing { index: i + 1 });
        }
        Ok(Self { records, deployment_start })
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn deployment_start(&self) -> f64 {
        self.deployment_start
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Prediction horizon, which is also the resampling interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Horizon {
    Min3,
    Min5,
    Min15,
    Min30,
    Min60,
}

impl Horizon {
    pub const ALL: [Horizon; 5] = [Horizon::Min3, Horizon::Min5, Horizon::Min15, Horizon::Min30, Horizon::Min60];

    pub fn from_seconds(seconds: u64) -> Result<Self, DatasetError> {
        Self::ALL.into_iter().find(|h| h.seconds() == seconds).ok_or(DatasetError::UnsupportedHorizon(seconds))
    }

    pub fn seconds(self) -> u64 {
        match self {
            Horizon::Min3 => 180,
            Horizon::Min5 => 300,
            Horizon::Min15 => 900,
            Horizon::Min30 => 1800,
            Horizon::Min60 => 3600,
        }
    }

    pub fn seconds_f64(self) -> f64 {
        self.seconds() as f64
    }

    /// Mini-batch size used for this horizon unless overridden.
    pub fn default_batch_size(self) -> usize {
        match self {
            Horizon::Min3 => 300,
            Horizon::Min5 => 150,
            Horizon::Min15 => 50,
            Horizon::Min30 => 20,
            Horizon::Min60 => 8,
        }
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.seconds())
    }
}

impl std::str::FromStr for Horizon {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let seconds =
            s.strip_suffix('s').unwrap_or(s).parse::<u64>().map_err(|_| DatasetError::UnsupportedHorizon(0))?;
        Self::from_seconds(seconds)
    }
}
