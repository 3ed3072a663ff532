use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::Rng;

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// One named parameter tensor and its gradient slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            name: name.into(),
            shape,
            value: vec![0.0; n],
            grad: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Ordered collection of parameters; names are unique.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterStore {
    params: Vec<Param>,
}

impl ParameterStore {
    pub fn new(params: Vec<Param>) -> Result<Self> {
        for (i, p) in params.iter().enumerate() {
            if params[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::Shape(format!("duplicate parameter name {}", p.name)));
            }
            if p.value.len() != p.shape.iter().product::<usize>() || p.grad.len() != p.value.len() {
                return Err(Error::Shape(format!(
                    "parameter {} does not match its shape {:?}",
                    p.name, p.shape
                )));
            }
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total scalar count.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(Param::len).sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> &[f64] {
        &self
            .get(name)
            .unwrap_or_else(|| panic!("no parameter named {name}"))
            .value
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn set_grads(&mut self, grads: &Gradients) -> Result<()> {
        if grads.buffers.len() != self.params.len() {
            return Err(Error::Shape(
                "gradient set does not match parameter store".into(),
            ));
        }
        for (p, g) in self.params.iter_mut().zip(&grads.buffers) {
            if g.len() != p.value.len() {
                return Err(Error::Shape(format!(
                    "gradient for {} has wrong length",
                    p.name
                )));
            }
            p.grad.copy_from_slice(g);
        }
        Ok(())
    }

    /// Rounds every value to the nearest `f32`, the checkpoint precision.
    pub fn round_to_f32(&mut self) {
        for p in &mut self.params {
            p.value.iter_mut().for_each(|v| *v = *v as f32 as f64);
        }
    }

    /// Hash of names, shapes and value bits.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for p in &self.params {
            p.name.hash(&mut h);
            p.shape.hash(&mut h);
            for v in &p.value {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }
}

/// Gradient buffers aligned with a [`ParameterStore`]'s order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub buffers: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(store: &ParameterStore) -> Self {
        Self {
            buffers: store.params().iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.buffers.iter_mut().zip(&other.buffers) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for buf in &mut self.buffers {
            buf.iter_mut().for_each(|x| *x *= s);
        }
    }
}

pub(crate) fn conv_weight_name(stage: usize) -> String {
    format!("encoder.conv{stage}.weight")
}

pub(crate) fn conv_bias_name(stage: usize) -> String {
    format!("encoder.conv{stage}.bias")
}

pub const POOL_WEIGHTS: &str = "pool.score_weights";
pub const POOL_BIAS: &str = "pool.score_bias";
pub const HEAD_WEIGHT: &str = "head.weight";
pub const HEAD_BIAS: &str = "head.bias";

/// Zero-valued store with the layout implied by `cfg`.
pub fn empty_params(cfg: &ModelConfig) -> ParameterStore {
    let mut params = Vec::new();
    let mut in_ch = cfg.encoder.in_channels;
    for (s, &out_ch) in cfg.encoder.stage_channels.iter().enumerate() {
        params.push(Param::zeros(conv_weight_name(s), vec![out_ch, in_ch, 3, 3]));
        params.push(Param::zeros(conv_bias_name(s), vec![out_ch]));
        in_ch = out_ch;
    }
    let f = cfg.encoder.feature_dim();
    params.push(Param::zeros(POOL_WEIGHTS, vec![f]));
    params.push(Param::zeros(POOL_BIAS, vec![1]));
    params.push(Param::zeros(HEAD_WEIGHT, vec![1 + cfg.class_count, f]));
    params.push(Param::zeros(HEAD_BIAS, vec![1 + cfg.class_count]));
    ParameterStore { params }
}

/// Weights ~ U(−1/√fan_in, 1/√fan_in), biases 0; deterministic per seed.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<ParameterStore> {
    cfg.validate()?;
    let mut store = empty_params(cfg);
    let mut rng = stream_rng(seed, Stream::Init, 0, 0);
    for p in store.params_mut() {
        let is_bias = p.name.ends_with("bias");
        if is_bias {
            continue;
        }
        let fan_in: usize = if p.shape.len() == 1 {
            p.shape[0]
        } else {
            p.shape[1..].iter().product()
        };
        let bound = 1.0 / (fan_in as f64).sqrt();
        for v in &mut p.value {
            *v = rng.gen_range(-bound..bound);
        }
    }
    Ok(store)
}
