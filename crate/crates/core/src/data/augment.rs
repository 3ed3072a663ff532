use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::render::ViewStack;
use crate::rng::{stream_rng, Stream};

/// Train-time input corruption: inverted dropout followed by additive
/// Gaussian noise on the elements that remain non-zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub input_dropout_p: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            input_dropout_p: 0.2,
            noise_sigma: 0.01,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.input_dropout_p) {
            return Err(Error::Config(format!(
                "input dropout {} outside [0, 1)",
                self.input_dropout_p
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise sigma {} must be non-negative",
                self.noise_sigma
            )));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.input_dropout_p == 0.0 && self.noise_sigma == 0.0
    }
}

/// Augments `stack`; the random stream depends only on
/// `(cfg.seed, sample_index, epoch)`.
pub fn augment(
    stack: &ViewStack,
    cfg: &AugmentConfig,
    sample_index: u64,
    epoch: u64,
) -> Result<ViewStack> {
    cfg.validate()?;
    let mut out = stack.clone();
    if cfg.is_identity() {
        return Ok(out);
    }
    let p = cfg.input_dropout_p;
    let keep_scale = 1.0 / (1.0 - p);
    let sigma = cfg.noise_sigma;
    let mut rng = stream_rng(cfg.seed, Stream::Augment, sample_index, epoch);
    for x in out.data_mut() {
        let dropped = p > 0.0 && rng.gen::<f64>() < p;
        if dropped {
            *x = 0.0;
            continue;
        }
        let mut v = *x as f64 * keep_scale;
        if sigma > 0.0 && v != 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            v += sigma * z;
        }
        *x = v as f32;
    }
    Ok(out)
}
