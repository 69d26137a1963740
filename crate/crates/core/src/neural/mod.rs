//! A single-layer LSTM with a linear head, trained with pinball loss.
//!
//! Everything is hand-written: the forward recurrence, backpropagation through
//! time, Adam, and a central-difference gradient checker used to verify the
//! backward pass. Parameters live in one flat vector (see [`Layout`]) so the
//! optimizer, clipping and model files can treat them uniformly.

mod adam;
mod gradcheck;
mod loss;
mod lstm;
mod train;

pub use adam::{adam_step, AdamParams, AdamState};
pub use gradcheck::{grad_check, grad_check_with, GradCheckOptions, GradCheckReport, TargetMode};
pub use loss::{pinball_grad, pinball_loss};
pub use lstm::{ForwardCache, Gate, Layout, LstmWeights};
pub use train::{dataset_loss, train, TrainingSummary};

use crate::dataset::{Horizon, SupervisedWindow, FEATURE_COUNT, SEQUENCE_LENGTH, TARGET_COUNT};

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("non-finite feature")]
    NonFiniteFeature,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("training diverged (non-finite loss) at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
}

/// Network shape, target quantile and initialization seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub input_size: usize,
    pub hidden_size: usize,
    pub output_size: usize,
    pub sequence_length: usize,
    /// Target quantile, strictly inside (0, 1).
    pub quantile: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_size: FEATURE_COUNT,
            hidden_size: 32,
            output_size: TARGET_COUNT,
            sequence_length: SEQUENCE_LENGTH,
            quantile: 0.5,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let sizes = [self.input_size, self.hidden_size, self.output_size, self.sequence_length];
        if sizes.contains(&0) {
            return Err(NeuralError::Config("all sizes must be at least 1".into()));
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(NeuralError::Config(format!("quantile {} is outside (0, 1)", self.quantile)));
        }
        Ok(())
    }
}

/// Optimizer and schedule settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub adam: AdamParams,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Global L2 norm above which a batch gradient is rescaled.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamParams::default(),
            batch_size: Horizon::Min3.default_batch_size(),
            max_epochs: 200,
            patience: 20,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn for_horizon(horizon: Horizon) -> Self {
        Self { batch_size: horizon.default_batch_size(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.batch_size == 0 {
            return Err(NeuralError::Config("batch size must be at least 1".into()));
        }
        if self.patience >= self.max_epochs {
            return Err(NeuralError::Config(format!(
                "patience {} must be below max epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if !(self.clip_norm > 0.0) || !(self.adam.learning_rate > 0.0) {
            return Err(NeuralError::Config("clip norm and learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub weights: LstmWeights,
    pub summary: TrainingSummary,
}

impl TrainedModel {
    fn check_window_shape(&self) -> Result<(), NeuralError> {
        let c = &self.config;
        if (c.input_size, c.sequence_length, c.output_size) != (FEATURE_COUNT, SEQUENCE_LENGTH, TARGET_COUNT) {
            return Err(NeuralError::Shape(format!(
                "model expects {} steps x {} features -> {} outputs, windows are {SEQUENCE_LENGTH} x {FEATURE_COUNT} -> {TARGET_COUNT}",
                c.sequence_length, c.input_size, c.output_size
            )));
        }
        Ok(())
    }

    /// Voltage, current and power predicted for the window's target interval.
    pub fn predict(&self, window: &SupervisedWindow) -> Result<[f64; TARGET_COUNT], NeuralError> {
        self.check_window_shape()?;
        let cache = self.weights.forward(window.flat_inputs())?;
        let mut out = [0.0; TARGET_COUNT];
        out.copy_from_slice(cache.output());
        Ok(out)
    }

    /// Predictions for many windows; each is independent of the others.
    pub fn predict_batch(&self, windows: &[SupervisedWindow]) -> Result<Vec<[f64; TARGET_COUNT]>, NeuralError> {
        self.check_window_shape()?;
        let mut cache = ForwardCache::new(self.weights.layout(), SEQUENCE_LENGTH);
        windows
            .iter()
            .map(|w| {
                self.weights.forward_into(w.flat_inputs(), &mut cache)?;
                let mut out = [0.0; TARGET_COUNT];
                out.copy_from_slice(cache.output());
                Ok(out)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(ModelConfig::default().validate().is_ok());
        assert!(ModelConfig { quantile: 1.0, ..Default::default() }.validate().is_err());
        assert!(ModelConfig { hidden_size: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { patience: 200, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
        assert_eq!(TrainConfig::for_horizon(Horizon::Min60).batch_size, 8);
    }

    #[test]
    fn predict_rejects_mismatched_model() {
        let config = ModelConfig { input_size: 3, ..Default::default() };
        let model = TrainedModel { config, weights: LstmWeights::init(&config), summary: TrainingSummary::default() };
        let w = SupervisedWindow { inputs: [[0.0; 8]; 4], target: [0.0; 3], target_interval_start: 0.0 };
        assert!(matches!(model.predict(&w), Err(NeuralError::Shape(_))));
    }
}
