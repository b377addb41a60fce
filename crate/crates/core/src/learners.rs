//! Online learners: each one predicts a distribution over labels for an input
//! and then updates deterministically on the observed example.
//!
//! States are values. [`LearnerState::update`] returns a new state; the
//! in-place variant exists for the hot loops of the prequential engine.
//! Serialization is canonical (fixed-width little-endian numbers, maps in
//! key order) so two states are equal exactly when their bytes are equal.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::codelength::{Example, Input, PredictiveDistribution, CLAMP_FLOOR};
use crate::error::{at_index, EdlError, Result};

/// Default constant learning rate for the softmax learner.
pub const DEFAULT_LEARNING_RATE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Uniform,
    Kt,
    Bayesian,
    ConceptTable,
    Softmax,
    Scripted,
    RuleTable,
    FormatKt,
}

impl LearnerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::Uniform => "uniform",
            LearnerKind::Kt => "kt",
            LearnerKind::Bayesian => "bayesian",
            LearnerKind::ConceptTable => "concept_table",
            LearnerKind::Softmax => "softmax",
            LearnerKind::Scripted => "scripted",
            LearnerKind::RuleTable => "rule_table",
            LearnerKind::FormatKt => "format_kt",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LearnerKind {
    type Err = EdlError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "uniform" => LearnerKind::Uniform,
            "kt" => LearnerKind::Kt,
            "bayesian" => LearnerKind::Bayesian,
            "concept_table" => LearnerKind::ConceptTable,
            "softmax" => LearnerKind::Softmax,
            "scripted" => LearnerKind::Scripted,
            "rule_table" => LearnerKind::RuleTable,
            "format_kt" => LearnerKind::FormatKt,
            other => return Err(EdlError::Argument(format!("unknown learner kind `{other}`"))),
        })
    }
}

/// Predicts uniformly forever and never learns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformState {
    pub k: usize,
}

/// Add-1/2 (Krichevsky–Trofimov) estimator of the label marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KtState {
    pub counts: Vec<u64>,
}

impl KtState {
    pub fn new(k: usize) -> Self {
        Self { counts: vec![0; k] }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn distribution(&self) -> PredictiveDistribution {
        kt_distribution(&self.counts)
    }
}

fn kt_distribution(counts: &[u64]) -> PredictiveDistribution {
    let total: u64 = counts.iter().sum();
    let denom = total as f64 + 0.5 * counts.len() as f64;
    PredictiveDistribution::from_normalized(counts.iter().map(|&c| (c as f64 + 0.5) / denom).collect())
}

/// A finite class of deterministic label functions over `0..input_space_size`,
/// stored as a row-major `m × input_space_size` lookup table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisTable {
    k: usize,
    input_space_size: usize,
    labels: Vec<u16>,
}

impl HypothesisTable {
    pub fn new(k: usize, input_space_size: usize, rows: Vec<Vec<u16>>) -> Result<Self> {
        if k < 2 || k > u16::MAX as usize {
            return Err(EdlError::Argument(format!("unsupported label count {k}")));
        }
        if rows.is_empty() {
            return Err(EdlError::Argument("hypothesis class is empty".into()));
        }
        let mut labels = Vec::with_capacity(rows.len() * input_space_size);
        for (j, row) in rows.iter().enumerate() {
            if row.len() != input_space_size {
                return Err(EdlError::Argument(format!(
                    "hypothesis {j} has {} entries, expected {input_space_size}",
                    row.len()
                )));
            }
            if row.iter().any(|&y| y as usize >= k) {
                return Err(EdlError::Argument(format!("hypothesis {j} emits a label >= {k}")));
            }
            labels.extend_from_slice(row);
        }
        Ok(Self {
            k,
            input_space_size,
            labels,
        })
    }

    pub fn m(&self) -> usize {
        self.labels.len() / self.input_space_size
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn input_space_size(&self) -> usize {
        self.input_space_size
    }

    pub fn label(&self, hypothesis: usize, input: usize) -> usize {
        self.labels[hypothesis * self.input_space_size + input] as usize
    }

    pub fn row(&self, hypothesis: usize) -> &[u16] {
        let s = self.input_space_size;
        &self.labels[hypothesis * s..(hypothesis + 1) * s]
    }
}

/// Bayesian learner over a finite class of deterministic hypotheses with a
/// uniform prior. The posterior is uniform over the hypotheses consistent
/// with everything seen so far, so it is stored as the sorted surviving set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesianHypothesisState {
    table: Arc<HypothesisTable>,
    alive: Vec<u32>,
}

impl BayesianHypothesisState {
    pub fn new(table: Arc<HypothesisTable>) -> Self {
        let alive = (0..table.m() as u32).collect();
        Self { table, alive }
    }

    pub fn table(&self) -> &HypothesisTable {
        &self.table
    }

    pub fn surviving(&self) -> &[u32] {
        &self.alive
    }

    /// Posterior weight of each of the m hypotheses.
    pub fn posterior(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.table.m()];
        let share = 1.0 / self.alive.len() as f64;
        for &j in &self.alive {
            w[j as usize] = share;
        }
        w
    }

    /// Entropy of the posterior in nats (ln of the surviving count).
    pub fn posterior_entropy(&self) -> f64 {
        (self.alive.len() as f64).ln()
    }

    fn input_index(&self, input: &Input) -> Result<usize> {
        match input {
            Input::Token(x) if (*x as usize) < self.table.input_space_size() => Ok(*x as usize),
            other => Err(EdlError::Argument(format!(
                "bayesian learner needs a token below {}, got {other:?}",
                self.table.input_space_size()
            ))),
        }
    }

    fn predict(&self, input: &Input) -> Result<PredictiveDistribution> {
        let x = self.input_index(input)?;
        let mut votes = vec![0u64; self.table.k()];
        for &j in &self.alive {
            votes[self.table.label(j as usize, x)] += 1;
        }
        let total = self.alive.len() as f64;
        Ok(PredictiveDistribution::from_normalized(
            votes.into_iter().map(|v| v as f64 / total).collect(),
        ))
    }

    fn update(&mut self, example: &Example) -> Result<()> {
        let x = self.input_index(&example.input)?;
        let table = &self.table;
        let survivors: Vec<u32> = self
            .alive
            .iter()
            .copied()
            .filter(|&j| table.label(j as usize, x) == example.label)
            .collect();
        if survivors.is_empty() {
            return Err(EdlError::Contradiction { index: 0 });
        }
        self.alive = survivors;
        Ok(())
    }
}

/// Memorizes one label per concept; uniform on unseen concepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptTableState {
    pub k: usize,
    pub memory: BTreeMap<u64, u32>,
}

impl ConceptTableState {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            memory: BTreeMap::new(),
        }
    }

    fn concept(input: &Input) -> Result<u64> {
        match input {
            Input::Token(c) => Ok(*c),
            other => Err(EdlError::Argument(format!(
                "concept table needs a token input, got {other:?}"
            ))),
        }
    }
}

/// Multinomial logistic regression trained by constant-rate SGD.
/// `weights` is row-major `k × d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxRegressionState {
    pub k: usize,
    pub d: usize,
    pub weights: Vec<f64>,
    pub learning_rate: f64,
}

impl SoftmaxRegressionState {
    pub fn zeros(k: usize, d: usize, learning_rate: f64) -> Result<Self> {
        if !(learning_rate.is_finite() && learning_rate > 0.0) {
            return Err(EdlError::Argument(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        Ok(Self {
            k,
            d,
            weights: vec![0.0; k * d],
            learning_rate,
        })
    }

    fn features<'a>(&self, input: &'a Input) -> Result<&'a [f64]> {
        match input {
            Input::Features(x) if x.len() == self.d => Ok(x),
            Input::Features(x) => Err(EdlError::Argument(format!(
                "feature length {} does not match d = {}",
                x.len(),
                self.d
            ))),
            other => Err(EdlError::Argument(format!(
                "softmax learner needs features, got {other:?}"
            ))),
        }
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = self
            .weights
            .chunks_exact(self.d)
            .map(|row| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>())
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / z).collect()
    }

    fn apply(&mut self, gradient: &[f64], scale: f64) -> Result<()> {
        for (w, g) in self.weights.iter_mut().zip(gradient) {
            *w -= scale * g;
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(EdlError::InvariantViolation(
                "softmax weights became non-finite".into(),
            ));
        }
        Ok(())
    }
}

/// Gradient of the cross-entropy at one example with respect to the weights,
/// row-major `k × d`: `(p − onehot(y)) ⊗ x`.
pub fn gradient(state: &SoftmaxRegressionState, example: &Example) -> Result<Vec<f64>> {
    let x = state.features(&example.input)?;
    if example.label >= state.k {
        return Err(EdlError::Argument(format!("label {} >= k", example.label)));
    }
    let p = state.probabilities(x);
    let mut grad = vec![0.0; state.k * state.d];
    for (c, row) in grad.chunks_exact_mut(state.d).enumerate() {
        let err = p[c] - if c == example.label { 1.0 } else { 0.0 };
        for (g, xi) in row.iter_mut().zip(x) {
            *g = err * xi;
        }
    }
    Ok(grad)
}

/// Emits, at step i, a two-point distribution whose codelength on the target
/// label is exactly `schedule[i]` (then `terminal` once the schedule runs out).
/// The target label is the input token, or 0 for an empty input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedState {
    pub k: usize,
    pub schedule: Arc<Vec<f64>>,
    pub terminal: f64,
}

impl ScriptedState {
    pub fn new(k: usize, schedule: Vec<f64>, terminal: f64) -> Result<Self> {
        let ceiling = -CLAMP_FLOOR.ln();
        for &c in schedule.iter().chain(std::iter::once(&terminal)) {
            if !c.is_finite() || c < 0.0 {
                return Err(EdlError::Argument(format!(
                    "scripted codelength must be finite and non-negative, got {c}"
                )));
            }
            if c > ceiling {
                return Err(EdlError::UnreachableCodelength(c));
            }
        }
        Ok(Self {
            k,
            schedule: Arc::new(schedule),
            terminal,
        })
    }

    fn target(&self, input: &Input) -> Result<usize> {
        match input {
            Input::Empty => Ok(0),
            Input::Token(t) if (*t as usize) < self.k => Ok(*t as usize),
            other => Err(EdlError::Argument(format!(
                "scripted learner needs an empty or label-token input, got {other:?}"
            ))),
        }
    }

    fn predict(&self, input: &Input, step: u64) -> Result<PredictiveDistribution> {
        let target = self.target(input)?;
        let c = self
            .schedule
            .get(step as usize)
            .copied()
            .unwrap_or(self.terminal);
        let p = (-c).exp();
        let mut probs = vec![0.0; self.k];
        probs[target] = p;
        probs[(target + 1) % self.k] = 1.0 - p;
        Ok(PredictiveDistribution::from_normalized(probs))
    }
}

/// Learns one offset rule per tagged component: inside component `tag` with
/// alphabet size `a`, the label of `index` is `(index + offset) mod a`.
/// Unknown components are predicted uniformly over their alphabet, so the
/// rule is worth `ln a` nats per example once one example reveals it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleTableState {
    pub k: usize,
    pub alphabets: Arc<BTreeMap<u32, u32>>,
    pub learned: BTreeMap<u32, u32>,
}

impl RuleTableState {
    pub fn new(k: usize, alphabets: BTreeMap<u32, u32>) -> Result<Self> {
        if let Some((tag, a)) = alphabets.iter().find(|(_, &a)| a == 0 || a as usize > k) {
            return Err(EdlError::Argument(format!(
                "component {tag} has alphabet {a}, must be in [1, {k}]"
            )));
        }
        Ok(Self {
            k,
            alphabets: Arc::new(alphabets),
            learned: BTreeMap::new(),
        })
    }

    fn locate(&self, input: &Input) -> Result<(u32, u64, u32)> {
        match input {
            Input::Tagged { tag, index } => match self.alphabets.get(tag) {
                Some(&a) => Ok((*tag, *index, a)),
                None => Err(EdlError::Argument(format!("unknown component tag {tag}"))),
            },
            other => Err(EdlError::Argument(format!(
                "rule table needs a tagged input, got {other:?}"
            ))),
        }
    }

    fn predict(&self, input: &Input) -> Result<PredictiveDistribution> {
        let (tag, index, a) = self.locate(input)?;
        let mut probs = vec![0.0; self.k];
        match self.learned.get(&tag) {
            Some(&offset) => probs[((index + offset as u64) % a as u64) as usize] = 1.0,
            None => probs[..a as usize].iter_mut().for_each(|p| *p = 1.0 / a as f64),
        }
        Ok(PredictiveDistribution::from_normalized(probs))
    }

    fn update(&mut self, example: &Example) -> Result<()> {
        let (tag, index, a) = self.locate(&example.input)?;
        if example.label >= a as usize {
            return Err(EdlError::Contradiction { index: 0 });
        }
        let offset = ((example.label as u64 + a as u64 - index % a as u64) % a as u64) as u32;
        match self.learned.get(&tag) {
            Some(&known) if known != offset => Err(EdlError::Contradiction { index: 0 }),
            _ => {
                self.learned.insert(tag, offset);
                Ok(())
            }
        }
    }
}

/// Format token (tag 0) plus capability tokens (tag 1, one per concept
/// index). Both components are add-1/2 estimators: the format one is pooled
/// across all examples, the capability one is kept per concept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatKtState {
    pub k: usize,
    pub format: Vec<u64>,
    pub capability: BTreeMap<u64, Vec<u64>>,
}

pub const FORMAT_TAG: u32 = 0;
pub const CAPABILITY_TAG: u32 = 1;

impl FormatKtState {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            format: vec![0; k],
            capability: BTreeMap::new(),
        }
    }

    fn predict(&self, input: &Input) -> Result<PredictiveDistribution> {
        match input {
            Input::Tagged { tag: FORMAT_TAG, .. } => Ok(kt_distribution(&self.format)),
            Input::Tagged {
                tag: CAPABILITY_TAG,
                index,
            } => Ok(match self.capability.get(index) {
                Some(counts) => kt_distribution(counts),
                None => PredictiveDistribution::uniform(self.k),
            }),
            other => Err(EdlError::Argument(format!(
                "format learner needs a format or capability token, got {other:?}"
            ))),
        }
    }

    fn update(&mut self, example: &Example) -> Result<()> {
        match example.input {
            Input::Tagged { tag: FORMAT_TAG, .. } => self.format[example.label] += 1,
            Input::Tagged {
                tag: CAPABILITY_TAG,
                index,
            } => {
                self.capability.entry(index).or_insert_with(|| vec![0; self.k])[example.label] += 1
            }
            ref other => {
                return Err(EdlError::Argument(format!(
                    "format learner needs a format or capability token, got {other:?}"
                )))
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Uniform(UniformState),
    Kt(KtState),
    Bayesian(BayesianHypothesisState),
    ConceptTable(ConceptTableState),
    Softmax(SoftmaxRegressionState),
    Scripted(ScriptedState),
    RuleTable(RuleTableState),
    FormatKt(FormatKtState),
}

/// A learner's parameter snapshot plus the number of updates applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    model: Model,
    step_count: u64,
}

impl LearnerState {
    pub fn new(model: Model) -> Self {
        Self {
            model,
            step_count: 0,
        }
    }

    pub fn uniform(k: usize) -> Self {
        Self::new(Model::Uniform(UniformState { k }))
    }

    pub fn kt(k: usize) -> Self {
        Self::new(Model::Kt(KtState::new(k)))
    }

    pub fn bayesian(table: Arc<HypothesisTable>) -> Self {
        Self::new(Model::Bayesian(BayesianHypothesisState::new(table)))
    }

    pub fn concept_table(k: usize) -> Self {
        Self::new(Model::ConceptTable(ConceptTableState::new(k)))
    }

    pub fn softmax(k: usize, d: usize, learning_rate: f64) -> Result<Self> {
        Ok(Self::new(Model::Softmax(SoftmaxRegressionState::zeros(
            k,
            d,
            learning_rate,
        )?)))
    }

    pub fn format_kt(k: usize) -> Self {
        Self::new(Model::FormatKt(FormatKtState::new(k)))
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn kind(&self) -> LearnerKind {
        match self.model {
            Model::Uniform(_) => LearnerKind::Uniform,
            Model::Kt(_) => LearnerKind::Kt,
            Model::Bayesian(_) => LearnerKind::Bayesian,
            Model::ConceptTable(_) => LearnerKind::ConceptTable,
            Model::Softmax(_) => LearnerKind::Softmax,
            Model::Scripted(_) => LearnerKind::Scripted,
            Model::RuleTable(_) => LearnerKind::RuleTable,
            Model::FormatKt(_) => LearnerKind::FormatKt,
        }
    }

    pub fn k(&self) -> usize {
        match &self.model {
            Model::Uniform(s) => s.k,
            Model::Kt(s) => s.counts.len(),
            Model::Bayesian(s) => s.table.k(),
            Model::ConceptTable(s) => s.k,
            Model::Softmax(s) => s.k,
            Model::Scripted(s) => s.k,
            Model::RuleTable(s) => s.k,
            Model::FormatKt(s) => s.k,
        }
    }

    /// Number of trainable parameters, where that notion is meaningful.
    pub fn parameter_count(&self) -> Option<u64> {
        match &self.model {
            Model::Softmax(s) => Some(s.weights.len() as u64),
            Model::Kt(s) => Some(s.counts.len() as u64),
            _ => None,
        }
    }

    pub fn predict(&self, input: &Input) -> Result<PredictiveDistribution> {
        match &self.model {
            Model::Uniform(s) => Ok(PredictiveDistribution::uniform(s.k)),
            Model::Kt(s) => Ok(s.distribution()),
            Model::Bayesian(s) => s.predict(input),
            Model::ConceptTable(s) => {
                let c = ConceptTableState::concept(input)?;
                Ok(match s.memory.get(&c) {
                    Some(&y) => PredictiveDistribution::point_mass(s.k, y as usize),
                    None => PredictiveDistribution::uniform(s.k),
                })
            }
            Model::Softmax(s) => Ok(PredictiveDistribution::from_normalized(
                s.probabilities(s.features(input)?),
            )),
            Model::Scripted(s) => s.predict(input, self.step_count),
            Model::RuleTable(s) => s.predict(input),
            Model::FormatKt(s) => s.predict(input),
        }
    }

    pub fn update(&self, example: &Example) -> Result<Self> {
        let mut next = self.clone();
        next.update_in_place(example)?;
        Ok(next)
    }

    pub fn update_in_place(&mut self, example: &Example) -> Result<()> {
        let k = self.k();
        if example.label >= k {
            return Err(EdlError::Argument(format!(
                "label {} outside [0, {k})",
                example.label
            )));
        }
        match &mut self.model {
            Model::Uniform(_) => {}
            Model::Kt(s) => s.counts[example.label] += 1,
            Model::Bayesian(s) => s.update(example)?,
            Model::ConceptTable(s) => {
                let c = ConceptTableState::concept(&example.input)?;
                s.memory.insert(c, example.label as u32);
            }
            Model::Softmax(s) => {
                let g = gradient(s, example)?;
                let lr = s.learning_rate;
                s.apply(&g, lr)?;
            }
            Model::Scripted(s) => {
                s.target(&example.input)?;
            }
            Model::RuleTable(s) => s.update(example)?,
            Model::FormatKt(s) => s.update(example)?,
        }
        self.step_count += 1;
        Ok(())
    }

    /// One update on a whole batch. The softmax learner takes a single step
    /// along the mean gradient; every other learner is order-free within a
    /// batch and applies the examples one after another.
    pub fn update_batch_in_place(&mut self, batch: &[Example]) -> Result<()> {
        if let Model::Softmax(s) = &mut self.model {
            if batch.is_empty() {
                return Ok(());
            }
            let mut mean = vec![0.0; s.weights.len()];
            for ex in batch {
                for (m, g) in mean.iter_mut().zip(gradient(s, ex)?) {
                    *m += g;
                }
            }
            let scale = s.learning_rate / batch.len() as f64;
            s.apply(&mean, scale)?;
            self.step_count += batch.len() as u64;
            return Ok(());
        }
        batch
            .iter()
            .enumerate()
            .try_for_each(|(i, ex)| self.update_in_place(ex).map_err(|e| at_index(e, i)))
    }

    pub fn to_canonical_bytes(&self) -> Vec<u8> {
        bincode::serialize(self).expect("learner states always serialize")
    }

    pub fn from_canonical_bytes(bytes: &[u8]) -> Result<Self> {
        bincode::deserialize(bytes).map_err(|e| EdlError::Decode(e.to_string()))
    }
}
