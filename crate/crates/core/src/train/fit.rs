use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::{train_epoch, validate, AdamState, Dataset, TrainConfig};
use crate::data::{class_weights, warn, BinningScheme, Manifest, Split};
use crate::error::{Error, Result};
use crate::model::{init_params, Checkpoint, EncoderConfig, LossConfig, ModelConfig, HEAD_BIAS};
use crate::render::RenderConfig;

pub const LOG_HEADER: &str = "epoch,train_loss,val_mse,val_mae,seconds";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    pub improved: bool,
    pub stop: bool,
}

/// Patience tracker on validation MSE (1-based epochs).
///
/// An epoch improves when its loss is below `best - min_delta`. Training
/// stops once more than `patience` consecutive epochs have failed to improve.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    min_delta: f64,
    best: Option<(usize, f64)>,
    since_improvement: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        Self {
            patience,
            min_delta,
            best: None,
            since_improvement: 0,
        }
    }

    pub fn update(&mut self, epoch: usize, val_loss: f64) -> StopDecision {
        let improved = match self.best {
            None => val_loss.is_finite(),
            Some((_, best)) => val_loss < best - self.min_delta,
        };
        if improved {
            self.best = Some((epoch, val_loss));
            self.since_improvement = 0;
        } else {
            self.since_improvement += 1;
        }
        StopDecision {
            improved,
            stop: self.since_improvement > self.patience,
        }
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }

    pub fn since_improvement(&self) -> usize {
        self.since_improvement
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mse: f64,
    pub val_mae: f64,
    pub seconds: f64,
}

impl EpochLog {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.3}",
            self.epoch, self.train_loss, self.val_mse, self.val_mae, self.seconds
        )
    }
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub train: TrainConfig,
    /// `in_channels` is replaced by the channel count of the data.
    pub encoder: EncoderConfig,
    pub render: RenderConfig,
    pub scheme: BinningScheme,
    pub run_dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub best_checkpoint: PathBuf,
    pub log_path: PathBuf,
    pub model: ModelConfig,
    /// Final parameters, after the last epoch run.
    pub final_checkpoint: Checkpoint,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(format!("writing {}", path.display()), e)
}

fn join_f64(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Trains on the manifest's train split, early-stopping on validation MSE.
/// Writes `train_log.csv`, `ckpt_epoch{N}.bin` for every improving epoch and
/// `ckpt_best.bin` under `cfg.run_dir`. `on_epoch` sees each log row.
pub fn fit(
    manifest: &Manifest,
    cfg: &FitConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<FitReport> {
    cfg.train.validate()?;
    let train_records = manifest.split(Split::Train);
    let val_records = manifest.split(Split::Validation);
    if train_records.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    if val_records.is_empty() {
        return Err(Error::EmptySplit("validation"));
    }
    fs::create_dir_all(&cfg.run_dir).map_err(io_err(&cfg.run_dir))?;
    let cache = (!cfg.train.no_cache).then(|| cfg.run_dir.join("cache"));
    let train = Dataset::prepare(&train_records, &cfg.render, &cfg.scheme, cache.as_deref())?;
    let val = Dataset::prepare(&val_records, &cfg.render, &cfg.scheme, cache.as_deref())?;

    let in_channels = train.items[0].stack()?.channels();
    let model = ModelConfig {
        encoder: EncoderConfig {
            in_channels,
            ..cfg.encoder.clone()
        },
        class_count: cfg.scheme.class_count(),
    };
    model.validate()?;

    let weights = class_weights(&train.class_counts(model.class_count))?;
    if !weights.empty_classes().is_empty() {
        warn(&format!(
            "no training samples in classes {:?}; their weight assumes a count of 1",
            weights.empty_classes()
        ));
    }
    let loss_cfg = LossConfig::new(cfg.train.ce_lambda, weights)?;

    let mut params = init_params(&model, cfg.train.seed)?;
    if cfg.train.init_ga_bias_from_labels {
        let labels = train.labels();
        let mean = labels.iter().sum::<f64>() / labels.len() as f64;
        let bias = params
            .get_mut(HEAD_BIAS)
            .ok_or_else(|| Error::Invariant(format!("missing parameter {HEAD_BIAS}")))?;
        bias.value[0] = mean;
    }
    params.round_to_f32();
    let mut adam = AdamState::new(&params);

    let log_path = cfg.run_dir.join("train_log.csv");
    let mut log = fs::File::create(&log_path).map_err(io_err(&log_path))?;
    writeln!(log, "{LOG_HEADER}").map_err(io_err(&log_path))?;

    let best_path = cfg.run_dir.join("ckpt_best.bin");
    let mut stopper = EarlyStopping::new(
        cfg.train.early_stop_patience,
        cfg.train.early_stop_min_delta,
    );
    let mut epochs = Vec::new();
    let start = Instant::now();
    let checkpoint =
        |params: &crate::model::ParameterStore, epoch: usize, val_mse: f64, adam_step: u64| {
            let mut ck = Checkpoint::new(params.clone(), &model);
            ck.set("epoch", epoch);
            ck.set("val_mse", val_mse);
            ck.set("adam_step", adam_step);
            ck.set("seed", cfg.train.seed);
            ck.set("rng", "chacha8");
            ck.set("ce_lambda", cfg.train.ce_lambda);
            ck.set("bin_edges", join_f64(cfg.scheme.edges()));
            ck.set("render_resolution", cfg.render.resolution);
            ck.set("render_fov_y_deg", cfg.render.fov_y_deg);
            ck.set("render_distance", cfg.render.distance);
            ck
        };

    for epoch in 1..=cfg.train.max_epochs {
        let train_loss = train_epoch(
            &train,
            &mut params,
            &mut adam,
            &model,
            &loss_cfg,
            &cfg.train,
            epoch as u64,
        )?;
        let metrics = validate(&val, &params, &model)?;
        let row = EpochLog {
            epoch,
            train_loss,
            val_mse: metrics.mse,
            val_mae: metrics.mae,
            seconds: start.elapsed().as_secs_f64(),
        };
        writeln!(log, "{}", row.csv_row()).map_err(io_err(&log_path))?;
        log.flush().map_err(io_err(&log_path))?;
        on_epoch(&row);
        epochs.push(row);

        let decision = stopper.update(epoch, metrics.mse);
        if decision.improved {
            let ck = checkpoint(&params, epoch, metrics.mse, adam.step);
            ck.save(&cfg.run_dir.join(format!("ckpt_epoch{epoch}.bin")))?;
            ck.save(&best_path)?;
        }
        if decision.stop {
            break;
        }
    }

    let (best_epoch, best_val_mse) = stopper
        .best()
        .ok_or_else(|| Error::Invariant("validation MSE was never finite".into()))?;
    let last = epochs.last().expect("at least one epoch");
    let final_checkpoint = checkpoint(&params, last.epoch, last.val_mse, adam.step);
    Ok(FitReport {
        epochs,
        best_epoch,
        best_val_mse,
        best_checkpoint: best_path,
        log_path,
        model,
        final_checkpoint,
    })
}
