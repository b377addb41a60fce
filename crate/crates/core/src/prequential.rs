//! Prequential scoring: each example is coded under the state trained on the
//! examples before it, then the learner updates. From the resulting trace
//! this module derives MDL, EDL against a test loss, SDL against a known
//! optimum, and regret against a fixed comparator.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::codelength::{codelength, nats_to_bits, LabeledDataset};
use crate::error::{at_index, EdlError, Result};
use crate::learners::LearnerState;
use crate::stats::{rng_from, sum, CompensatedSum};
use crate::toymodels::ToyWorld;

/// Per-step codelengths of one prequential pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrequentialTrace {
    /// ℓ(θ_{i−1}; x_i, y_i) in nats.
    pub step_codelengths: Vec<f64>,
    /// Start index of every batch.
    pub batch_boundaries: Vec<usize>,
}

impl PrequentialTrace {
    pub fn n(&self) -> usize {
        self.step_codelengths.len()
    }

    pub fn mdl(&self) -> f64 {
        sum(self.step_codelengths.iter().copied())
    }

    pub fn mdl_bits(&self) -> f64 {
        nats_to_bits(self.mdl())
    }

    /// Running MDL after each step.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = CompensatedSum::new();
        self.step_codelengths
            .iter()
            .map(|&c| {
                acc.add(c);
                acc.value()
            })
            .collect()
    }
}

/// Result of a prequential pass: the trace and θ_n.
#[derive(Debug, Clone)]
pub struct PrequentialRun {
    pub trace: PrequentialTrace,
    pub final_state: LearnerState,
    /// State each example was scored under, when recorded.
    pub states: Option<Vec<LearnerState>>,
}

fn run(
    dataset: &LabeledDataset,
    initial: &LearnerState,
    batch_size: usize,
    record: bool,
) -> Result<PrequentialRun> {
    if batch_size == 0 {
        return Err(EdlError::Argument("batch size must be at least 1".into()));
    }
    if initial.k() != dataset.k() {
        return Err(EdlError::Argument(format!(
            "learner has k = {} but dataset has k = {}",
            initial.k(),
            dataset.k()
        )));
    }
    let examples = dataset.examples();
    let mut state = initial.clone();
    let mut step_codelengths = Vec::with_capacity(examples.len());
    let mut batch_boundaries = Vec::new();
    let mut states = record.then(|| Vec::with_capacity(examples.len()));
    for (b, batch) in examples.chunks(batch_size).enumerate() {
        let start = b * batch_size;
        batch_boundaries.push(start);
        for (offset, ex) in batch.iter().enumerate() {
            let dist = state.predict(&ex.input).map_err(|e| at_index(e, start + offset))?;
            step_codelengths.push(codelength(&dist, ex.label)?.nats());
            if let Some(s) = states.as_mut() {
                s.push(state.clone());
            }
        }
        state.update_batch_in_place(batch).map_err(|e| match e {
            EdlError::Contradiction { index } => EdlError::Contradiction {
                index: start + index,
            },
            other => other,
        })?;
    }
    Ok(PrequentialRun {
        trace: PrequentialTrace {
            step_codelengths,
            batch_boundaries,
        },
        final_state: state,
        states,
    })
}

/// Scores `dataset` prequentially from `initial`. Every example in a batch
/// is scored under the state from before that batch.
pub fn run_prequential(
    dataset: &LabeledDataset,
    initial: &LearnerState,
    batch_size: usize,
) -> Result<PrequentialRun> {
    run(dataset, initial, batch_size, false)
}

/// Like [`run_prequential`] but also keeps the state each example was
/// scored under.
pub fn run_prequential_recording(
    dataset: &LabeledDataset,
    initial: &LearnerState,
    batch_size: usize,
) -> Result<PrequentialRun> {
    run(dataset, initial, batch_size, true)
}

/// Early-stopping schedule for training past the first pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    /// Total passes over the data, the prequential pass included.
    pub max_epochs: u32,
    /// Epochs without validation improvement before stopping; 0 disables
    /// early stopping.
    pub patience: u32,
    pub validation_fraction: f64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            max_epochs: 10,
            patience: 2,
            validation_fraction: 0.1,
        }
    }
}

impl StoppingRule {
    /// No extra training: θ* = θ_n.
    pub fn single_pass() -> Self {
        Self {
            max_epochs: 0,
            patience: 0,
            validation_fraction: 0.0,
        }
    }

    /// `epochs` passes in total, no validation split.
    pub fn fixed_budget(epochs: u32) -> Self {
        Self {
            max_epochs: epochs,
            patience: 0,
            validation_fraction: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.validation_fraction) {
            return Err(EdlError::Config(format!(
                "validation fraction {} outside [0, 0.5]",
                self.validation_fraction
            )));
        }
        if self.patience > self.max_epochs {
            return Err(EdlError::Config(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        Ok(())
    }
}

fn mean_loss(state: &LearnerState, dataset: &LabeledDataset, indices: &[usize]) -> Result<f64> {
    let ex = dataset.examples();
    let mut acc = CompensatedSum::new();
    for &i in indices {
        acc.add(codelength(&state.predict(&ex[i].input)?, ex[i].label)?.nats());
    }
    Ok(acc.value() / indices.len() as f64)
}

/// Continues training θ_n on the same data to obtain θ*.
///
/// The prequential pass counts as the first epoch, so at most
/// `max_epochs − 1` further passes run, each in a seed-derived order. With
/// patience and a validation fraction, a held-out slice of the data is
/// excluded from these passes and the best state by validation loss is
/// returned (θ_n included).
pub fn continue_training(
    state: &LearnerState,
    dataset: &LabeledDataset,
    rule: &StoppingRule,
    seed: u64,
) -> Result<LearnerState> {
    rule.validate()?;
    if rule.max_epochs <= 1 || dataset.is_empty() {
        return Ok(state.clone());
    }
    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(&[seed, 0xE5]));
    let n_val = if rule.patience > 0 && rule.validation_fraction > 0.0 && n >= 2 {
        ((rule.validation_fraction * n as f64).ceil() as usize).clamp(1, n - 1)
    } else {
        0
    };
    let (val, train) = order.split_at(n_val);
    let mut train = train.to_vec();
    let examples = dataset.examples();

    let mut current = state.clone();
    let mut best = state.clone();
    let mut best_loss = if n_val > 0 { mean_loss(state, dataset, val)? } else { f64::INFINITY };
    let mut stale = 0;
    for epoch in 1..rule.max_epochs {
        train.shuffle(&mut rng_from(&[seed, 0xE6, epoch as u64]));
        for &i in &train {
            current.update_in_place(&examples[i]).map_err(|e| at_index(e, i))?;
        }
        if n_val == 0 {
            continue;
        }
        let loss = mean_loss(&current, dataset, val)?;
        if loss < best_loss {
            best_loss = loss;
            best = current.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= rule.patience {
                break;
            }
        }
    }
    Ok(if n_val > 0 { best } else { current })
}

/// Mean codelength of `state` on a held-out set.
pub fn test_loss(state: &LearnerState, test_set: &LabeledDataset) -> Result<f64> {
    if test_set.is_empty() {
        return Err(EdlError::Argument("test set is empty".into()));
    }
    let indices: Vec<usize> = (0..test_set.len()).collect();
    mean_loss(state, test_set, &indices)
}

/// Exact expected codelength of `state` on a toy world's test distribution.
pub fn population_loss_exact(state: &LearnerState, world: &ToyWorld) -> Result<f64> {
    world.population_loss(state)
}

/// EDL and its normalizations for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdlReport {
    pub mdl_nats: f64,
    pub n: usize,
    pub test_loss_nats: f64,
    pub edl_nats: f64,
    pub edl_bits: f64,
    pub edl_bits_per_example: f64,
    pub edl_bits_per_token: f64,
    pub edl_bits_per_parameter: Option<f64>,
    pub regret_nats: Option<f64>,
    pub sdl_nats: Option<f64>,
}

impl EdlReport {
    pub fn with_regret(mut self, regret_nats: f64) -> Self {
        self.regret_nats = Some(regret_nats);
        self
    }

    pub fn with_sdl(mut self, sdl_nats: f64) -> Self {
        self.sdl_nats = Some(sdl_nats);
        self
    }
}

/// EDL = Σ_i (ℓ_i − L_test), summed term by term so a learner that never
/// changes reports exactly zero.
pub fn edl(
    trace: &PrequentialTrace,
    test_loss_nats: f64,
    token_count: usize,
    parameter_count: Option<u64>,
) -> Result<EdlReport> {
    let n = trace.n();
    if token_count < n {
        return Err(EdlError::Argument(format!(
            "token count {token_count} is smaller than the {n} scored examples"
        )));
    }
    if !test_loss_nats.is_finite() || test_loss_nats < 0.0 {
        return Err(EdlError::Argument(format!("test loss {test_loss_nats} is not a codelength")));
    }
    let edl_nats = sum(trace.step_codelengths.iter().map(|c| c - test_loss_nats));
    let edl_bits = nats_to_bits(edl_nats);
    let per = |count: f64| if count > 0.0 { edl_bits / count } else { 0.0 };
    Ok(EdlReport {
        mdl_nats: trace.mdl(),
        n,
        test_loss_nats,
        edl_nats,
        edl_bits,
        edl_bits_per_example: per(n as f64),
        edl_bits_per_token: per(token_count as f64),
        edl_bits_per_parameter: parameter_count.map(|p| per(p as f64)),
        regret_nats: None,
        sdl_nats: None,
    })
}

/// MDL minus the codelength the fixed `comparator` assigns to the same data.
pub fn regret_vs_comparator(
    trace: &PrequentialTrace,
    comparator: &LearnerState,
    dataset: &LabeledDataset,
) -> Result<f64> {
    if trace.n() != dataset.len() {
        return Err(EdlError::Argument(format!(
            "trace has {} steps but dataset has {} examples",
            trace.n(),
            dataset.len()
        )));
    }
    let mut acc = CompensatedSum::new();
    for (c, ex) in trace.step_codelengths.iter().zip(dataset.examples()) {
        acc.add(*c);
        acc.add(-codelength(&comparator.predict(&ex.input)?, ex.label)?.nats());
    }
    Ok(acc.value())
}

/// SDL = MDL − n·L*.
pub fn sdl(trace: &PrequentialTrace, optimal_loss_nats: f64) -> f64 {
    sum(trace.step_codelengths.iter().map(|c| c - optimal_loss_nats))
}

/// Population-loss view of a run: EDL in expectation is n(L̄ − L(θ*)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub n: usize,
    pub initial_loss: f64,
    /// Mean of L(θ_{i−1}) over the n scoring states.
    pub trajectory_mean: f64,
    pub final_loss: f64,
    pub predicted_edl: f64,
}

/// Computes the audit from the scoring states θ_0..θ_{n−1} and θ*.
pub fn generalization_audit(
    states: &[LearnerState],
    final_state: &LearnerState,
    world: &ToyWorld,
) -> Result<AuditRecord> {
    if states.is_empty() {
        return Err(EdlError::Argument("audit needs at least one scoring state".into()));
    }
    let losses = states
        .iter()
        .map(|s| world.population_loss(s))
        .collect::<Result<Vec<_>>>()?;
    let final_loss = world.population_loss(final_state)?;
    let n = states.len();
    Ok(AuditRecord {
        n,
        initial_loss: losses[0],
        trajectory_mean: sum(losses.iter().copied()) / n as f64,
        final_loss,
        predicted_edl: sum(losses.iter().map(|l| l - final_loss)),
    })
}
