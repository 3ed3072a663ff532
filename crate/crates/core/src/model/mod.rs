//! The network: shared conv encoder per view, softmax attention pooling over
//! views, and one affine head producing GA (weeks) plus class logits.

mod attention;
mod checkpoint;
mod encoder;
mod head;
mod network;
mod params;

pub use attention::{attention_pool, softmax, AttentionPool, PoolOutput};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use encoder::encoder_forward;
pub use head::{cross_entropy, head_forward, log_sum_exp, loss, HeadOutput, JointHead, LossConfig};
pub use network::{forward_batch, predict, BatchForward, Phase, Sample, SampleForward};
pub use params::{
    empty_params, init_params, Gradients, Param, ParameterStore, HEAD_BIAS, HEAD_WEIGHT, POOL_BIAS,
    POOL_WEIGHTS,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// No dropout; deterministic and side-effect free.
    Eval,
    /// Internal dropout draws from the `(seed, sample_index, epoch)` stream.
    Train {
        seed: u64,
        sample_index: u64,
        epoch: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub in_channels: usize,
    pub stage_channels: Vec<usize>,
    /// Dropout on per-view encoder features in train mode.
    pub internal_dropout_p: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            in_channels: 4,
            stage_channels: vec![16, 32, 64, 128],
            internal_dropout_p: 0.0,
        }
    }
}

impl EncoderConfig {
    /// Width F of the per-view feature vector (last stage's channel count).
    pub fn feature_dim(&self) -> usize {
        self.stage_channels.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0
            || self.stage_channels.is_empty()
            || self.stage_channels.contains(&0)
        {
            return Err(Error::Config(format!(
                "encoder needs ≥1 input channel and ≥1 stage with ≥1 channel, got {} / {:?}",
                self.in_channels, self.stage_channels
            )));
        }
        if !(0.0..1.0).contains(&self.internal_dropout_p) {
            return Err(Error::Config(format!(
                "internal dropout {} outside [0, 1)",
                self.internal_dropout_p
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub class_count: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::default(),
            class_count: 5,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.class_count < 2 {
            return Err(Error::Config("class_count must be at least 2".into()));
        }
        Ok(())
    }

    /// Checks that `store` has exactly the layout this config implies.
    pub fn check_params(&self, store: &ParameterStore) -> Result<()> {
        let expected = empty_params(self);
        if store.len() != expected.len() {
            return Err(Error::Shape(format!(
                "parameter store has {} tensors, config implies {}",
                store.len(),
                expected.len()
            )));
        }
        for (a, b) in store.params().iter().zip(expected.params()) {
            if a.name != b.name || a.shape != b.shape {
                return Err(Error::Shape(format!(
                    "parameter {} has shape {:?}, config implies {} {:?}",
                    a.name, a.shape, b.name, b.shape
                )));
            }
        }
        Ok(())
    }
}
