//! Label spaces, examples, predictive distributions and the codelength of a
//! label under a distribution. All accounting is in nats; bits appear only
//! where results are reported.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{EdlError, Result};

/// Smallest probability ever scored. Keeps every codelength finite.
pub const CLAMP_FLOOR: f64 = 1e-12;

/// Tolerance on the total mass of a predictive distribution.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelSpace {
    k: usize,
}

impl LabelSpace {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(EdlError::Argument(format!(
                "label space needs at least 2 classes, got {k}"
            )));
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn contains(&self, label: usize) -> bool {
        label < self.k
    }
}

/// Input descriptor. Each learner understands a subset of these shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Input {
    /// No input; the label is predicted from the marginal alone.
    Empty,
    /// A discrete symbol such as a concept id or a point of a finite input space.
    Token(u64),
    /// A discrete symbol inside a tagged, disjoint support.
    Tagged { tag: u32, index: u64 },
    /// A real feature vector.
    Features(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub input: Input,
    pub label: usize,
}

impl Example {
    pub fn new(input: Input, label: usize) -> Self {
        Self { input, label }
    }
}

/// An ordered training or test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    examples: Vec<Example>,
    label_space: LabelSpace,
    token_count: usize,
}

impl LabeledDataset {
    /// Builds a dataset that scores one token per example.
    pub fn new(examples: Vec<Example>, label_space: LabelSpace) -> Result<Self> {
        let tokens = examples.len();
        Self::with_token_count(examples, label_space, tokens)
    }

    pub fn with_token_count(
        examples: Vec<Example>,
        label_space: LabelSpace,
        token_count: usize,
    ) -> Result<Self> {
        if let Some((i, ex)) = examples
            .iter()
            .enumerate()
            .find(|(_, ex)| !label_space.contains(ex.label))
        {
            return Err(EdlError::Argument(format!(
                "example {i} has label {} outside [0, {})",
                ex.label,
                label_space.k()
            )));
        }
        if token_count < examples.len() {
            return Err(EdlError::Argument(format!(
                "token count {token_count} is below the example count {}",
                examples.len()
            )));
        }
        Ok(Self {
            examples,
            label_space,
            token_count,
        })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn label_space(&self) -> LabelSpace {
        self.label_space
    }

    pub fn k(&self) -> usize {
        self.label_space.k()
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    pub fn labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label).collect()
    }

    pub fn inputs(&self) -> Vec<Input> {
        self.examples.iter().map(|e| e.input.clone()).collect()
    }

    /// Reorders the examples; `order` must be a permutation of `0..len`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.len() {
            return Err(EdlError::Argument("permutation length mismatch".into()));
        }
        let mut seen = vec![false; self.len()];
        for &i in order {
            if i >= self.len() || std::mem::replace(&mut seen[i], true) {
                return Err(EdlError::Argument("not a permutation".into()));
            }
        }
        let examples = order.iter().map(|&i| self.examples[i].clone()).collect();
        Ok(Self {
            examples,
            label_space: self.label_space,
            token_count: self.token_count,
        })
    }

    /// Subset by index, keeping one scored token per retained example.
    pub fn select(&self, indices: &[usize]) -> Self {
        let examples: Vec<Example> = indices.iter().map(|&i| self.examples[i].clone()).collect();
        let token_count = examples.len();
        Self {
            examples,
            label_space: self.label_space,
            token_count,
        }
    }
}

/// Probability vector over the k labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    probabilities: Vec<f64>,
}

impl PredictiveDistribution {
    /// Validates and normalizes a vector of non-negative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(EdlError::Argument(
                "a predictive distribution needs at least 2 entries".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(EdlError::Argument(
                "predictive weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = crate::stats::sum(weights.iter().copied());
        if total <= 0.0 {
            return Err(EdlError::Argument("predictive weights sum to zero".into()));
        }
        let probabilities: Vec<f64> = weights.into_iter().map(|w| w / total).collect();
        let check = crate::stats::sum(probabilities.iter().copied());
        if (check - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(EdlError::Argument(format!(
                "distribution does not normalize (sum {check})"
            )));
        }
        Ok(Self { probabilities })
    }

    /// Wraps probabilities that are normalized by construction.
    pub(crate) fn from_normalized(probabilities: Vec<f64>) -> Self {
        debug_assert!(
            (probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9,
            "unnormalized distribution"
        );
        Self { probabilities }
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k >= 2, "uniform distribution needs k >= 2");
        Self {
            probabilities: vec![1.0 / k as f64; k],
        }
    }

    pub fn point_mass(k: usize, label: usize) -> Self {
        assert!(label < k, "point mass label out of range");
        let mut probabilities = vec![0.0; k];
        probabilities[label] = 1.0;
        Self { probabilities }
    }

    pub fn k(&self) -> usize {
        self.probabilities.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, label: usize) -> f64 {
        self.probabilities[label]
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        crate::stats::sum(
            self.probabilities
                .iter()
                .filter(|p| **p > 0.0)
                .map(|p| -p * p.ln()),
        )
    }
}

/// A non-negative, finite number of nats.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Codelength(f64);

impl Codelength {
    pub fn nats(self) -> f64 {
        self.0
    }

    pub fn bits(self) -> f64 {
        nats_to_bits(self.0)
    }
}

/// −ln of the (floored) probability assigned to `label`.
pub fn codelength(dist: &PredictiveDistribution, label: usize) -> Result<Codelength> {
    if label >= dist.k() {
        return Err(EdlError::Argument(format!(
            "label {label} outside [0, {})",
            dist.k()
        )));
    }
    let p = dist.probability(label).max(CLAMP_FLOOR);
    // p <= 1 so this is >= 0; the max() guards against -0.0.
    Ok(Codelength((-p.ln()).max(0.0)))
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / LN_2
}

pub fn bits_to_nats(bits: f64) -> f64 {
    bits * LN_2
}
