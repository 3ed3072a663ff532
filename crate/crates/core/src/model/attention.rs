/// Score-based view pooling parameters: `sᵥ = score_weights · fᵥ + score_bias`.
#[derive(Debug, Clone, Copy)]
pub struct AttentionPool<'a> {
    pub score_weights: &'a [f64],
    pub score_bias: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolOutput {
    pub pooled: Vec<f64>,
    /// Softmax weight of each view.
    pub weights: Vec<f64>,
    pub scores: Vec<f64>,
}

/// Max-subtracted softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

/// Softmax-weighted average of the rows of the V×F matrix `features`.
pub fn attention_pool(features: &[f64], dim: usize, pool: &AttentionPool) -> PoolOutput {
    assert_eq!(
        pool.score_weights.len(),
        dim,
        "score weights must have length F"
    );
    assert!(dim > 0 && features.len().is_multiple_of(dim) && !features.is_empty());
    let scores: Vec<f64> = features
        .chunks_exact(dim)
        .map(|f| {
            f.iter()
                .zip(pool.score_weights)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                + pool.score_bias
        })
        .collect();
    let weights = softmax(&scores);
    let mut pooled = vec![0.0; dim];
    for (f, &w) in features.chunks_exact(dim).zip(&weights) {
        for (p, x) in pooled.iter_mut().zip(f) {
            *p += w * x;
        }
    }
    PoolOutput {
        pooled,
        weights,
        scores,
    }
}

/// Gradients of the pooling layer given ∂L/∂pooled.
pub(crate) struct PoolGrads {
    pub dfeatures: Vec<f64>,
    pub dscore_weights: Vec<f64>,
    pub dscore_bias: f64,
}

pub(crate) fn attention_backward(
    features: &[f64],
    dim: usize,
    pool: &AttentionPool,
    out: &PoolOutput,
    dpooled: &[f64],
) -> PoolGrads {
    let rows: Vec<&[f64]> = features.chunks_exact(dim).collect();
    // ∂L/∂wᵥ = dpooled · fᵥ, then through softmax
    let dw: Vec<f64> = rows
        .iter()
        .map(|f| f.iter().zip(dpooled).map(|(a, b)| a * b).sum())
        .collect();
    let mean: f64 = out.weights.iter().zip(&dw).map(|(w, d)| w * d).sum();
    let dscores: Vec<f64> = out
        .weights
        .iter()
        .zip(&dw)
        .map(|(w, d)| w * (d - mean))
        .collect();

    let mut dfeatures = vec![0.0; features.len()];
    let mut dscore_weights = vec![0.0; dim];
    for (v, f) in rows.iter().enumerate() {
        let df = &mut dfeatures[v * dim..(v + 1) * dim];
        for j in 0..dim {
            df[j] = out.weights[v] * dpooled[j] + dscores[v] * pool.score_weights[j];
            dscore_weights[j] += dscores[v] * f[j];
        }
    }
    PoolGrads {
        dfeatures,
        dscore_weights,
        dscore_bias: dscores.iter().sum(),
    }
}
