//! Full forward pass (encoder → attention pool → joint head) and its exact
//! reverse-mode gradient.

use rayon::prelude::*;

use super::attention::{attention_backward, attention_pool, AttentionPool, PoolOutput};
use super::encoder::{
    backward_view, check_input, conv_params, encode_view, feature_dropout_mask, ViewCache,
};
use super::head::{head_forward, loss, loss_grad, HeadOutput, JointHead, LossConfig};
use super::params::{
    conv_bias_name, conv_weight_name, Gradients, ParameterStore, HEAD_BIAS, HEAD_WEIGHT, POOL_BIAS,
    POOL_WEIGHTS,
};
use super::{Mode, ModelConfig};
use crate::error::{Error, Result};
use crate::render::ViewStack;

/// One labelled input. `index` identifies the sample for its random
/// streams.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub stack: &'a ViewStack,
    pub ga_weeks: f64,
    pub class: usize,
    pub index: u64,
}

/// Batch-level mode; per-sample streams are derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Eval,
    Train { seed: u64, epoch: u64 },
}

impl Phase {
    fn mode_for(self, sample_index: u64) -> Mode {
        match self {
            Phase::Eval => Mode::Eval,
            Phase::Train { seed, epoch } => Mode::Train {
                seed,
                sample_index,
                epoch,
            },
        }
    }
}

pub(crate) fn pool_params(store: &ParameterStore) -> Result<AttentionPool<'_>> {
    let w = store
        .get(POOL_WEIGHTS)
        .ok_or_else(|| Error::Shape(format!("missing parameter {POOL_WEIGHTS}")))?;
    let b = store
        .get(POOL_BIAS)
        .ok_or_else(|| Error::Shape(format!("missing parameter {POOL_BIAS}")))?;
    Ok(AttentionPool {
        score_weights: &w.value,
        score_bias: b.value[0],
    })
}

pub(crate) fn head_params(store: &ParameterStore) -> Result<JointHead<'_>> {
    let w = store
        .get(HEAD_WEIGHT)
        .ok_or_else(|| Error::Shape(format!("missing parameter {HEAD_WEIGHT}")))?;
    let b = store
        .get(HEAD_BIAS)
        .ok_or_else(|| Error::Shape(format!("missing parameter {HEAD_BIAS}")))?;
    Ok(JointHead {
        weight: &w.value,
        bias: &b.value,
    })
}

/// Forward state of one sample.
pub struct SampleForward {
    /// V×F encoder features after internal dropout.
    pub features: Vec<f64>,
    pub pool: PoolOutput,
    pub output: HeadOutput,
    dropout_mask: Option<Vec<f64>>,
    caches: Vec<ViewCache>,
}

fn forward_sample(
    store: &ParameterStore,
    cfg: &ModelConfig,
    stack: &ViewStack,
    mode: Mode,
    keep: bool,
) -> Result<SampleForward> {
    check_input(stack, &cfg.encoder)?;
    let layers = conv_params(&cfg.encoder, store)?;
    let encoded: Vec<(Vec<f64>, Option<ViewCache>)> = (0..stack.views())
        .into_par_iter()
        .map(|v| encode_view(stack.view(v), stack.size(), &layers, keep))
        .collect();
    let dim = cfg.encoder.feature_dim();
    let mut features = Vec::with_capacity(stack.views() * dim);
    let mut caches = Vec::with_capacity(if keep { stack.views() } else { 0 });
    for (f, c) in encoded {
        features.extend_from_slice(&f);
        caches.extend(c);
    }
    let dropout_mask = feature_dropout_mask(features.len(), cfg.encoder.internal_dropout_p, mode);
    if let Some(mask) = &dropout_mask {
        features.iter_mut().zip(mask).for_each(|(f, m)| *f *= m);
    }
    let pool = attention_pool(&features, dim, &pool_params(store)?);
    let output = head_forward(&pool.pooled, &head_params(store)?)?;
    if output.logits.len() != cfg.class_count {
        return Err(Error::Shape(format!(
            "head emits {} logits, config expects {}",
            output.logits.len(),
            cfg.class_count
        )));
    }
    Ok(SampleForward {
        features,
        pool,
        output,
        dropout_mask,
        caches,
    })
}

/// Eval-mode prediction for a single stack.
pub fn predict(store: &ParameterStore, cfg: &ModelConfig, stack: &ViewStack) -> Result<HeadOutput> {
    Ok(forward_sample(store, cfg, stack, Mode::Eval, false)?.output)
}

/// Forward results of a batch, retaining what the backward pass needs.
pub struct BatchForward {
    pub samples: Vec<SampleForward>,
    labels: Vec<(f64, usize)>,
    params_fingerprint: u64,
}

pub fn forward_batch(
    store: &ParameterStore,
    cfg: &ModelConfig,
    batch: &[Sample],
    phase: Phase,
) -> Result<BatchForward> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    for s in batch {
        if s.class >= cfg.class_count {
            return Err(Error::Shape(format!(
                "class label {} out of range",
                s.class
            )));
        }
    }
    let samples = batch
        .par_iter()
        .map(|s| forward_sample(store, cfg, s.stack, phase.mode_for(s.index), true))
        .collect::<Result<Vec<_>>>()?;
    Ok(BatchForward {
        samples,
        labels: batch.iter().map(|s| (s.ga_weeks, s.class)).collect(),
        params_fingerprint: store.fingerprint(),
    })
}

impl BatchForward {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean per-sample loss.
    pub fn loss(&self, cfg: &LossConfig) -> f64 {
        let total: f64 = self
            .samples
            .iter()
            .zip(&self.labels)
            .map(|(s, &(ga, class))| loss(s.output.ga_pred, &s.output.logits, ga, class, cfg))
            .sum();
        total / self.samples.len() as f64
    }

    /// ∂(mean batch loss)/∂θ for every parameter, in store order. Per-sample
    /// gradients are summed in batch order, so the result does not depend on
    /// thread scheduling.
    pub fn backward(
        &self,
        store: &ParameterStore,
        cfg: &ModelConfig,
        loss_cfg: &LossConfig,
    ) -> Result<Gradients> {
        if store.fingerprint() != self.params_fingerprint {
            return Err(Error::Invariant(
                "backward called with parameters that differ from the forward pass".into(),
            ));
        }
        let layers = conv_params(&cfg.encoder, store)?;
        let pool = pool_params(store)?;
        let head = head_params(store)?;
        let dim = cfg.encoder.feature_dim();

        let index = |name: &str| {
            store
                .index_of(name)
                .ok_or_else(|| Error::Shape(format!("missing parameter {name}")))
        };
        let conv_idx: Vec<(usize, usize)> = (0..layers.len())
            .map(|s| Ok((index(&conv_weight_name(s))?, index(&conv_bias_name(s))?)))
            .collect::<Result<_>>()?;
        let (pw, pb, hw, hb) = (
            index(POOL_WEIGHTS)?,
            index(POOL_BIAS)?,
            index(HEAD_WEIGHT)?,
            index(HEAD_BIAS)?,
        );

        let per_sample: Vec<Gradients> = self
            .samples
            .par_iter()
            .zip(self.labels.par_iter())
            .map(|(s, &(ga, class))| {
                let mut g = Gradients::zeros_like(store);
                let dout = loss_grad(s.output.ga_pred, &s.output.logits, ga, class, loss_cfg);

                let pooled = &s.pool.pooled;
                let mut dpooled = vec![0.0; dim];
                for (r, &d) in dout.iter().enumerate() {
                    g.buffers[hb][r] = d;
                    let wrow = &head.weight[r * dim..(r + 1) * dim];
                    let grow = &mut g.buffers[hw][r * dim..(r + 1) * dim];
                    for j in 0..dim {
                        grow[j] = d * pooled[j];
                        dpooled[j] += wrow[j] * d;
                    }
                }

                let pg = attention_backward(&s.features, dim, &pool, &s.pool, &dpooled);
                g.buffers[pw].copy_from_slice(&pg.dscore_weights);
                g.buffers[pb][0] = pg.dscore_bias;
                let mut dfeat = pg.dfeatures;
                if let Some(mask) = &s.dropout_mask {
                    dfeat.iter_mut().zip(mask).for_each(|(d, m)| *d *= m);
                }

                let view_grads: Vec<Vec<(Vec<f64>, Vec<f64>)>> = s
                    .caches
                    .par_iter()
                    .enumerate()
                    .map(|(v, cache)| backward_view(&dfeat[v * dim..(v + 1) * dim], cache, &layers))
                    .collect();
                for vg in &view_grads {
                    for (stage, (dw, db)) in vg.iter().enumerate() {
                        let (wi, bi) = conv_idx[stage];
                        g.buffers[wi].iter_mut().zip(dw).for_each(|(a, b)| *a += b);
                        g.buffers[bi].iter_mut().zip(db).for_each(|(a, b)| *a += b);
                    }
                }
                g
            })
            .collect();

        let mut total = Gradients::zeros_like(store);
        for g in &per_sample {
            total.add_assign(g);
        }
        total.scale(1.0 / self.samples.len() as f64);
        Ok(total)
    }
}
