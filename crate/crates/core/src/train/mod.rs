//! Mini-batch Adam training with validation-MSE early stopping and
//! best-model checkpointing.

mod adam;
mod dataset;
mod fit;

use rand::seq::SliceRandom;
use rayon::prelude::*;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dataset::{cache_subdir, render_record, Dataset, DatasetItem, StackSource};
pub use fit::{fit, EarlyStopping, EpochLog, FitConfig, FitReport, StopDecision, LOG_HEADER};

use crate::data::{augment, AugmentConfig};
use crate::error::{Error, Result};
use crate::model::{
    forward_batch, predict, LossConfig, ModelConfig, ParameterStore, Phase, Sample,
};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub early_stop_min_delta: f64,
    pub seed: u64,
    pub augment: AugmentConfig,
    pub ce_lambda: f64,
    /// Start the regression bias at the mean training label instead of 0.
    pub init_ga_bias_from_labels: bool,
    /// Re-render every subject each epoch instead of caching `.mvr` stacks.
    pub no_cache: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 18,
            adam: AdamConfig::default(),
            max_epochs: 400,
            early_stop_patience: 30,
            early_stop_min_delta: 0.0,
            seed: 0,
            augment: AugmentConfig::default(),
            ce_lambda: 1.0,
            init_ga_bias_from_labels: true,
            no_cache: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.adam.learning_rate > 0.0 && self.adam.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.adam.learning_rate
            )));
        }
        if self.early_stop_patience == 0 {
            return Err(Error::Config(
                "early-stopping patience must be at least 1".into(),
            ));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        self.augment.validate()
    }
}

/// Sample order for `epoch`, a pure function of the seed and epoch.
pub fn epoch_order(n: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, Stream::Shuffle, epoch, 0));
    order
}

/// Batch sizes for `n` samples; the last batch may be partial.
pub fn batch_sizes(n: usize, batch_size: usize) -> Vec<usize> {
    (0..n)
        .step_by(batch_size)
        .map(|start| batch_size.min(n - start))
        .collect()
}

/// Runs one epoch over `data`. Returns the mean per-sample training loss.
/// Parameters are rounded to `f32` after every step, the precision they are
/// checkpointed at.
#[allow(clippy::too_many_arguments)]
pub fn train_epoch(
    data: &Dataset,
    params: &mut ParameterStore,
    state: &mut AdamState,
    model: &ModelConfig,
    loss_cfg: &LossConfig,
    cfg: &TrainConfig,
    epoch: u64,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    let order = epoch_order(data.len(), cfg.seed, epoch);
    let augment_cfg = AugmentConfig {
        seed: cfg.seed,
        ..cfg.augment
    };
    let mut total = 0.0;
    for chunk in order.chunks(cfg.batch_size) {
        let stacks = chunk
            .par_iter()
            .map(|&i| {
                let item = &data.items[i];
                let stack = item.stack()?;
                augment(&stack, &augment_cfg, i as u64, epoch)
            })
            .collect::<Result<Vec<_>>>()?;
        let batch: Vec<Sample> = chunk
            .iter()
            .zip(&stacks)
            .map(|(&i, stack)| Sample {
                stack,
                ga_weeks: data.items[i].record.ga_weeks,
                class: data.items[i].class,
                index: i as u64,
            })
            .collect();
        let fwd = forward_batch(
            params,
            model,
            &batch,
            Phase::Train {
                seed: cfg.seed,
                epoch,
            },
        )?;
        total += fwd.loss(loss_cfg) * batch.len() as f64;
        let grads = fwd.backward(params, model, loss_cfg)?;
        params.set_grads(&grads)?;
        adam_step(params, state, &cfg.adam)?;
        params.round_to_f32();
    }
    Ok(total / data.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationMetrics {
    /// Mean squared GA error, weeks².
    pub mse: f64,
    /// Mean absolute GA error, weeks.
    pub mae: f64,
}

/// Eval-mode GA predictions for every item, in dataset order.
pub fn predict_dataset(
    data: &Dataset,
    params: &ParameterStore,
    model: &ModelConfig,
) -> Result<Vec<f64>> {
    data.items
        .par_iter()
        .map(|item| Ok(predict(params, model, &*item.stack()?)?.ga_pred))
        .collect()
}

pub fn regression_metrics(preds: &[f64], labels: &[f64]) -> ValidationMetrics {
    let n = preds.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (p, y) in preds.iter().zip(labels) {
        se += (p - y).powi(2);
        ae += (p - y).abs();
    }
    ValidationMetrics {
        mse: se / n,
        mae: ae / n,
    }
}

/// Eval mode, no augmentation, parameters untouched.
pub fn validate(
    data: &Dataset,
    params: &ParameterStore,
    model: &ModelConfig,
) -> Result<ValidationMetrics> {
    if data.is_empty() {
        return Err(Error::EmptySplit("validation"));
    }
    let preds = predict_dataset(data, params, model)?;
    Ok(regression_metrics(&preds, &data.labels()))
}
