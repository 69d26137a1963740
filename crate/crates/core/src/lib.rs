//! Forecasting and activation scheduling for soil microbial fuel cell (SMFC)
//! energy traces.
//!
//! The crate is organised as a pipeline:
//!
//! - [`dataset`] ingests raw sensor traces, resamples them to a prediction
//!   horizon and builds lagged supervised windows, chronological splits and
//!   walk-forward folds.
//! - [`neural`] is a small LSTM with exact backpropagation through time,
//!   pinball (quantile) loss, Adam and a finite-difference gradient checker.
//! - [`forecast`] trains lower/median/upper quantile ensembles, produces
//!   interval forecasts and persists models.
//! - [`metrics`] scores forecasts (MAPE, total energy error, activation rates,
//!   interval coverage).
//! - [`harvestsim`] runs the stored-energy ledger of an intermittently active
//!   device and the naive and oracle reference schedules.
//! - [`synth`] generates seeded synthetic traces for experiments and tests.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dataset;
pub mod forecast;
pub mod harvestsim;
pub mod metrics;
pub mod neural;
pub mod synth;

pub use dataset::{
    Horizon, ResampledSeries, SampleRecord, SampleSeries, SplitSpec, SupervisedDataset, SupervisedWindow,
};
pub use forecast::{ForecastSeries, Quantile, QuantileEnsemble, QuantileForecast};
pub use harvestsim::{EnergyModel, HarvestConfig, SimulationTrace};
pub use metrics::MetricReport;
pub use neural::{ModelConfig, TrainConfig, TrainedModel};

/// Any error produced by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Dataset(#[from] dataset::DatasetError),
    #[error(transparent)]
    Neural(#[from] neural::NeuralError),
    #[error(transparent)]
    Forecast(#[from] forecast::ForecastError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error(transparent)]
    Harvest(#[from] harvestsim::HarvestError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
