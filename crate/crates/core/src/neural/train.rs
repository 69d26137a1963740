use crate::dataset::SupervisedDataset;

use super::{
    adam_step, pinball_grad, pinball_loss, AdamState, ForwardCache, LstmWeights, ModelConfig, NeuralError, TrainConfig,
    TrainedModel,
};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrainingSummary {
    pub epochs_run: usize,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    /// Mean training loss over the first epoch.
    pub first_train_loss: f64,
    /// Mean training loss over the last epoch run.
    pub final_train_loss: f64,
    pub best_val_loss: f64,
}

/// Mean pinball loss of `weights` over every window of `data`.
pub fn dataset_loss(weights: &LstmWeights, data: &SupervisedDataset, alpha: f64) -> Result<f64, NeuralError> {
    let mut cache = ForwardCache::new(weights.layout(), 0);
    let mut total = 0.0;
    for w in &data.windows {
        weights.forward_into(w.flat_inputs(), &mut cache)?;
        total += pinball_loss(cache.output(), &w.target, alpha);
    }
    Ok(total / data.len() as f64)
}

/// Mini-batch Adam on the pinball loss of `model_config.quantile`.
///
/// Batches are taken in chronological order every epoch. Training stops after
/// `patience` epochs without a lower validation loss, and the weights with the
/// lowest validation loss are returned.
pub fn train(
    train: &SupervisedDataset,
    val: &SupervisedDataset,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<TrainedModel, NeuralError> {
    model_config.validate()?;
    train_config.validate()?;
    if train.is_empty() {
        return Err(NeuralError::EmptySplit("train"));
    }
    if val.is_empty() {
        return Err(NeuralError::EmptySplit("validation"));
    }
    let alpha = model_config.quantile;
    let mut weights = LstmWeights::init(model_config);
    let mut grads = LstmWeights::zeros(weights.layout());
    let mut adam = AdamState::new(weights.layout().len());
    let mut cache = ForwardCache::new(weights.layout(), model_config.sequence_length);
    let mut d_out = vec![0.0; model_config.output_size];

    let mut best = (f64::INFINITY, weights.clone(), 0usize);
    let mut summary = TrainingSummary::default();
    let mut stale = 0;

    for epoch in 1..=train_config.max_epochs {
        let mut epoch_loss = 0.0;
        for (b, batch) in train.windows.chunks(train_config.batch_size).enumerate() {
            grads.fill_zero();
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for w in batch {
                weights.forward_into(w.flat_inputs(), &mut cache)?;
                batch_loss += pinball_loss(cache.output(), &w.target, alpha);
                pinball_grad(cache.output(), &w.target, alpha, &mut d_out);
                weights.backward_into(&cache, &d_out, scale, &mut grads);
            }
            let norm = grads.l2_norm();
            if !batch_loss.is_finite() || !norm.is_finite() {
                return Err(NeuralError::Diverged { epoch, batch: b + 1 });
            }
            if norm > train_config.clip_norm {
                grads.scale(train_config.clip_norm / norm);
            }
            adam_step(weights.params_mut(), grads.params(), &mut adam, train_config.adam);
            epoch_loss += batch_loss;
        }
        epoch_loss /= train.len() as f64;

        let val_loss = dataset_loss(&weights, val, alpha)?;
        if !val_loss.is_finite() {
            return Err(NeuralError::Diverged { epoch, batch: 0 });
        }
        if epoch == 1 {
            summary.first_train_loss = epoch_loss;
        }
        summary.final_train_loss = epoch_loss;
        summary.epochs_run = epoch;

        if val_loss < best.0 {
            best = (val_loss, weights.clone(), epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= train_config.patience {
                break;
            }
        }
    }

    let (best_val_loss, weights, best_epoch) = best;
    summary.best_val_loss = best_val_loss;
    summary.best_epoch = best_epoch;
    Ok(TrainedModel { config: *model_config, weights, summary })
}
