use crate::data::ClassWeights;
use crate::error::{Error, Result};

/// Single affine layer with `1 + K` outputs: row 0 is the GA regression
/// (weeks), rows `1..=K` are class logits.
#[derive(Debug, Clone, Copy)]
pub struct JointHead<'a> {
    /// `(1 + K) × F`, row-major.
    pub weight: &'a [f64],
    pub bias: &'a [f64],
}

impl JointHead<'_> {
    pub fn outputs(&self) -> usize {
        self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutput {
    pub ga_pred: f64,
    pub logits: Vec<f64>,
}

pub fn head_forward(pooled: &[f64], head: &JointHead) -> Result<HeadOutput> {
    let rows = head.outputs();
    if rows < 2 || head.weight.len() != rows * pooled.len() {
        return Err(Error::Shape(format!(
            "head weight has {} values, expected {rows}×{}",
            head.weight.len(),
            pooled.len()
        )));
    }
    let out: Vec<f64> = head
        .weight
        .chunks_exact(pooled.len())
        .zip(head.bias)
        .map(|(row, b)| b + row.iter().zip(pooled).map(|(w, x)| w * x).sum::<f64>())
        .collect();
    Ok(HeadOutput {
        ga_pred: out[0],
        logits: out[1..].to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    /// Weight of the classification term.
    pub ce_lambda: f64,
    pub class_weights: ClassWeights,
}

impl LossConfig {
    pub fn new(ce_lambda: f64, class_weights: ClassWeights) -> Result<Self> {
        if !(ce_lambda >= 0.0 && ce_lambda.is_finite()) {
            return Err(Error::Config(format!(
                "ce_lambda {ce_lambda} must be non-negative"
            )));
        }
        Ok(Self {
            ce_lambda,
            class_weights,
        })
    }
}

/// `ln Σ exp(xᵢ)` computed with the max subtracted.
pub fn log_sum_exp(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// −log softmax(logits)[class].
pub fn cross_entropy(logits: &[f64], class: usize) -> f64 {
    log_sum_exp(logits) - logits[class]
}

/// Per-sample joint loss `(ga_pred − ga)² + λ·w_c·CE(logits, c)`.
pub fn loss(
    ga_pred: f64,
    logits: &[f64],
    ga_label: f64,
    class_label: usize,
    cfg: &LossConfig,
) -> f64 {
    assert!(
        class_label < logits.len(),
        "class label {class_label} out of range"
    );
    let mse = (ga_pred - ga_label).powi(2);
    if cfg.ce_lambda == 0.0 {
        return mse;
    }
    mse + cfg.ce_lambda * cfg.class_weights.get(class_label) * cross_entropy(logits, class_label)
}

/// ∂loss/∂(ga_pred, logits...), laid out like the head's output rows.
pub(crate) fn loss_grad(
    ga_pred: f64,
    logits: &[f64],
    ga_label: f64,
    class_label: usize,
    cfg: &LossConfig,
) -> Vec<f64> {
    let mut g = Vec::with_capacity(1 + logits.len());
    g.push(2.0 * (ga_pred - ga_label));
    let scale = cfg.ce_lambda * cfg.class_weights.get(class_label);
    if scale == 0.0 {
        g.extend(std::iter::repeat_n(0.0, logits.len()));
        return g;
    }
    let lse = log_sum_exp(logits);
    for (k, &z) in logits.iter().enumerate() {
        let p = (z - lse).exp();
        let onehot = if k == class_label { 1.0 } else { 0.0 };
        g.push(scale * (p - onehot));
    }
    g
}
