use crate::error::{Error, Result};

/// Gestational-age bin edges in weeks. Bins are half-open `[eᵢ, eᵢ₊₁)`
/// except the last, which also includes its right edge.
#[derive(Debug, Clone, PartialEq)]
pub struct BinningScheme {
    edges: Vec<f64>,
}

impl Default for BinningScheme {
    fn default() -> Self {
        Self {
            edges: vec![23.0, 27.0, 32.0, 36.0, 40.0, 44.0],
        }
    }
}

impl BinningScheme {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 3 {
            return Err(Error::Config(
                "binning needs at least 2 classes (3 edges)".into(),
            ));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "bin edges must be finite and strictly ascending: {edges:?}"
            )));
        }
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn class_count(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn range(&self) -> (f64, f64) {
        (self.edges[0], self.edges[self.edges.len() - 1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinAssignment {
    pub class: usize,
    /// The value lay outside the scheme's range and was clamped.
    pub clamped: bool,
}

pub fn assign_bin(ga_weeks: f64, scheme: &BinningScheme) -> BinAssignment {
    let edges = scheme.edges();
    let last = scheme.class_count() - 1;
    let (lo, hi) = scheme.range();
    if ga_weeks < lo {
        return BinAssignment {
            class: 0,
            clamped: true,
        };
    }
    if ga_weeks > hi {
        return BinAssignment {
            class: last,
            clamped: true,
        };
    }
    // first interior edge strictly greater than the value
    let class = edges[1..edges.len() - 1].partition_point(|&e| e <= ga_weeks);
    BinAssignment {
        class,
        clamped: false,
    }
}

/// Per-class loss weights, inverse to class frequency and normalized to
/// mean 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights {
    weights: Vec<f64>,
    empty_classes: Vec<usize>,
}

impl ClassWeights {
    pub fn uniform(class_count: usize) -> Self {
        Self {
            weights: vec![1.0; class_count],
            empty_classes: Vec::new(),
        }
    }

    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Config(format!(
                "class weights must be positive and finite: {weights:?}"
            )));
        }
        Ok(Self {
            weights,
            empty_classes: Vec::new(),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, class: usize) -> f64 {
        self.weights[class]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Classes with no samples; their weight uses a count of 1.
    pub fn empty_classes(&self) -> &[usize] {
        &self.empty_classes
    }
}

pub fn class_weights(counts: &[usize]) -> Result<ClassWeights> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::Config(
            "class weights need at least one labelled sample".into(),
        ));
    }
    let k = counts.len() as f64;
    let raw: Vec<f64> = counts
        .iter()
        .map(|&c| total as f64 / (k * c.max(1) as f64))
        .collect();
    let mean = raw.iter().sum::<f64>() / k;
    Ok(ClassWeights {
        weights: raw.iter().map(|w| w / mean).collect(),
        empty_classes: counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(i, _)| i)
            .collect(),
    })
}
