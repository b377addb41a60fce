//! The five toy worlds (random labels, hypothesis collapse, disjoint
//! mixtures, coupon collection, format-plus-capability), their generators,
//! and the closed-form expected-EDL curves they are checked against.
//!
//! A [`ToySpec`] is the declarative record (kind, parameters, seed) that the
//! experiment configs carry. [`ToySpec::build`] materializes it into a
//! [`ToyWorld`], which owns the lookup tables and per-concept labels, samples
//! datasets, and enumerates its test distribution exactly.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codelength::{codelength, Example, Input, LabelSpace, LabeledDataset};
use crate::error::{EdlError, Result};
use crate::learners::{
    HypothesisTable, LearnerKind, LearnerState, Model, RuleTableState, ScriptedState,
    CAPABILITY_TAG, FORMAT_TAG,
};
use crate::stats::{rng_from, CompensatedSum};

pub const DEFAULT_INPUT_SPACE_SIZE: usize = 64;

fn default_input_space_size() -> usize {
    DEFAULT_INPUT_SPACE_SIZE
}

fn default_support_size() -> u64 {
    16
}

/// How hypothesis lookup tables are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableStyle {
    /// Every input splits the class into k equal label groups. When m is a
    /// power of k each input reads one base-k digit of the hypothesis index,
    /// so every fresh digit cuts the surviving set by exactly a factor k.
    #[default]
    Balanced,
    /// Each wrong hypothesis copies the generating one except on a
    /// log-uniformly sized random set of inputs. Elimination is slow, so
    /// the posterior keeps shrinking over many examples.
    Perturbed,
}

/// One disjoint sub-distribution of a mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    /// Loss reduction once the component's rule is known. Realized as a
    /// uniform alphabet of `exp(delta_nats)` labels, so it must be the log
    /// of a positive integer.
    pub delta_nats: f64,
    pub support_tag: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ToyParams {
    RandomLabels {
        k: usize,
        /// Label marginal; uniform when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        marginal: Option<Vec<f64>>,
    },
    HypothesisCollapse {
        m: usize,
        k: usize,
        #[serde(default = "default_input_space_size")]
        input_space_size: usize,
        #[serde(default)]
        tables: TableStyle,
    },
    DisjointMixture {
        k: usize,
        components: Vec<MixtureComponent>,
        #[serde(default = "default_support_size")]
        support_size: u64,
        /// Draw training data from this component only.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        trained_component: Option<usize>,
    },
    CouponCollector {
        concepts: usize,
        k: usize,
    },
    FormatLearning {
        concepts: usize,
        k: usize,
    },
}

/// Declarative toy-world record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySpec {
    pub seed: u64,
    #[serde(flatten)]
    pub params: ToyParams,
}

impl ToySpec {
    pub fn new(params: ToyParams, seed: u64) -> Self {
        Self { seed, params }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.params {
            ToyParams::RandomLabels { .. } => "random_labels",
            ToyParams::HypothesisCollapse { .. } => "hypothesis_collapse",
            ToyParams::DisjointMixture { .. } => "disjoint_mixture",
            ToyParams::CouponCollector { .. } => "coupon_collector",
            ToyParams::FormatLearning { .. } => "format_learning",
        }
    }

    /// Materializes the world with tables drawn from `seed` mixed with `salt`.
    pub fn build_salted(&self, salt: u64) -> Result<ToyWorld> {
        let mut rng = rng_from(&[self.seed, salt, 0x7707]);
        match &self.params {
            ToyParams::RandomLabels { k, marginal } => {
                let ls = LabelSpace::new(*k)?;
                let marginal = match marginal {
                    None => vec![1.0 / *k as f64; *k],
                    Some(p) => validate_marginal(p, *k)?,
                };
                Ok(ToyWorld::RandomLabels(RandomLabelWorld { label_space: ls, marginal }))
            }
            ToyParams::HypothesisCollapse {
                m,
                k,
                input_space_size,
                tables,
            } => Ok(ToyWorld::Hypothesis(HypothesisWorld::generate(
                *m,
                *k,
                *input_space_size,
                *tables,
                &mut rng,
            )?)),
            ToyParams::DisjointMixture {
                k,
                components,
                support_size,
                trained_component,
            } => Ok(ToyWorld::Mixture(MixtureWorld::generate(
                *k,
                components.clone(),
                *support_size,
                *trained_component,
                &mut rng,
            )?)),
            ToyParams::CouponCollector { concepts, k } => Ok(ToyWorld::Coupon(
                CouponWorld::generate(*concepts, *k, &mut rng)?,
            )),
            ToyParams::FormatLearning { concepts, k } => Ok(ToyWorld::Format(
                FormatWorld::generate(*concepts, *k, &mut rng)?,
            )),
        }
    }

    pub fn build(&self) -> Result<ToyWorld> {
        self.build_salted(0)
    }
}

fn validate_marginal(p: &[f64], k: usize) -> Result<Vec<f64>> {
    if p.len() != k || p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(EdlError::Config(format!(
            "label marginal must have {k} non-negative entries"
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(EdlError::Config(format!("label marginal sums to {total}")));
    }
    Ok(p.to_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomLabelWorld {
    pub label_space: LabelSpace,
    pub marginal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisWorld {
    pub table: Arc<HypothesisTable>,
    /// Index of the generating hypothesis.
    pub truth: usize,
    /// Input at which the k labels split the class into groups of m/k.
    pub diagnostic_input: Option<usize>,
    /// Inputs that, observed once each, leave only the generating hypothesis
    /// (digit layouts only).
    pub collapse_inputs: Option<Vec<usize>>,
}

/// Integer r with k^r == m, if any.
fn exact_log(m: usize, k: usize) -> Option<usize> {
    let mut power = 1usize;
    for r in 0..64 {
        if power == m {
            return Some(r);
        }
        power = power.checked_mul(k)?;
    }
    None
}

impl HypothesisWorld {
    fn generate(
        m: usize,
        k: usize,
        input_space_size: usize,
        style: TableStyle,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if k < 2 || m < 1 {
            return Err(EdlError::Argument(format!("need m >= 1 and k >= 2, got m={m}, k={k}")));
        }
        if input_space_size < 2 {
            return Err(EdlError::Argument("input space needs at least 2 points".into()));
        }
        let truth = rng.gen_range(0..m);
        match style {
            TableStyle::Balanced => Self::balanced(m, k, input_space_size, truth, rng),
            TableStyle::Perturbed => Self::perturbed(m, k, input_space_size, truth, rng),
        }
    }

    fn balanced(
        m: usize,
        k: usize,
        s: usize,
        truth: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if m % k != 0 {
            return Err(EdlError::Argument(format!(
                "k = {k} does not divide m = {m}; no input can split the class evenly"
            )));
        }
        let mut rows = vec![vec![0u16; s]; m];
        let digits = exact_log(m, k).filter(|&r| r >= 1 && r <= s);
        match digits {
            Some(r) => {
                for x in 0..s {
                    let position = if x < r { x } else { rng.gen_range(0..r) };
                    let stride = k.pow(position as u32);
                    let mut relabel: Vec<u16> = (0..k as u16).collect();
                    relabel.shuffle(rng);
                    for (j, row) in rows.iter_mut().enumerate() {
                        row[x] = relabel[(j / stride) % k];
                    }
                }
            }
            None => {
                for x in 0..s {
                    let mut order: Vec<usize> = (0..m).collect();
                    order.shuffle(rng);
                    for (j, row) in rows.iter_mut().enumerate() {
                        row[x] = (order[j] % k) as u16;
                    }
                }
            }
        }
        let table = Arc::new(HypothesisTable::new(k, s, rows)?);
        Ok(Self {
            table,
            truth,
            diagnostic_input: Some(0),
            collapse_inputs: digits.map(|r| (0..r).collect()),
        })
    }

    fn perturbed(
        m: usize,
        k: usize,
        s: usize,
        truth: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let base: Vec<u16> = (0..s).map(|_| rng.gen_range(0..k) as u16).collect();
        let log_s = (s as f64).log2();
        let mut rows = Vec::with_capacity(m);
        let mut inputs: Vec<usize> = (0..s).collect();
        for j in 0..m {
            let mut row = base.clone();
            if j != truth {
                let flips = (2f64.powf(rng.gen::<f64>() * log_s).round() as usize).clamp(1, s);
                inputs.shuffle(rng);
                for &x in &inputs[..flips] {
                    row[x] = ((base[x] as usize + rng.gen_range(1..k)) % k) as u16;
                }
            }
            rows.push(row);
        }
        Ok(Self {
            table: Arc::new(HypothesisTable::new(k, s, rows)?),
            truth,
            diagnostic_input: None,
            collapse_inputs: None,
        })
    }

    pub fn k(&self) -> usize {
        self.table.k()
    }

    pub fn label(&self, x: usize) -> usize {
        self.table.label(self.truth, x)
    }

    pub fn example(&self, x: usize) -> Example {
        Example::new(Input::Token(x as u64), self.label(x))
    }

    /// A single-hypothesis table holding only the generating function.
    pub fn truth_table(&self) -> Arc<HypothesisTable> {
        let row = self.table.row(self.truth).to_vec();
        Arc::new(
            HypothesisTable::new(self.table.k(), self.table.input_space_size(), vec![row])
                .expect("row copied from a valid table"),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureWorld {
    pub label_space: LabelSpace,
    pub components: Vec<MixtureComponent>,
    pub alphabets: Vec<u32>,
    pub offsets: Vec<u32>,
    pub support_size: u64,
    pub trained_component: Option<usize>,
}

impl MixtureWorld {
    fn generate(
        k: usize,
        components: Vec<MixtureComponent>,
        support_size: u64,
        trained_component: Option<usize>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let label_space = LabelSpace::new(k)?;
        if components.is_empty() {
            return Err(EdlError::Argument("mixture needs at least one component".into()));
        }
        if support_size == 0 {
            return Err(EdlError::Argument("component support must be non-empty".into()));
        }
        if components.iter().any(|c| !(c.weight > 0.0 && c.weight <= 1.0)) {
            return Err(EdlError::Argument("mixture weights must lie in (0, 1]".into()));
        }
        let total: f64 = crate::stats::sum(components.iter().map(|c| c.weight));
        if (total - 1.0).abs() > 1e-12 {
            return Err(EdlError::Argument(format!("mixture weights sum to {total}")));
        }
        let mut tags: Vec<u32> = components.iter().map(|c| c.support_tag).collect();
        tags.sort_unstable();
        if tags.windows(2).any(|w| w[0] == w[1]) {
            return Err(EdlError::Argument("component support tags must be distinct".into()));
        }
        if let Some(j) = trained_component {
            if j >= components.len() {
                return Err(EdlError::Argument(format!(
                    "trained component {j} out of range (have {})",
                    components.len()
                )));
            }
        }
        let mut alphabets = Vec::with_capacity(components.len());
        for c in &components {
            let a = c.delta_nats.exp().round();
            if !(c.delta_nats >= 0.0) || (a.ln() - c.delta_nats).abs() > 1e-9 || a as usize > k {
                return Err(EdlError::Argument(format!(
                    "delta {} nats is not ln of an alphabet size in [1, {k}]",
                    c.delta_nats
                )));
            }
            alphabets.push(a as u32);
        }
        let offsets = alphabets.iter().map(|&a| rng.gen_range(0..a)).collect();
        Ok(Self {
            label_space,
            components,
            alphabets,
            offsets,
            support_size,
            trained_component,
        })
    }

    pub fn label(&self, component: usize, index: u64) -> usize {
        let a = self.alphabets[component] as u64;
        ((index + self.offsets[component] as u64) % a) as usize
    }

    pub fn example(&self, component: usize, index: u64) -> Example {
        Example::new(
            Input::Tagged {
                tag: self.components[component].support_tag,
                index,
            },
            self.label(component, index),
        )
    }

    pub fn learner(&self) -> Result<LearnerState> {
        let alph: BTreeMap<u32, u32> = self
            .components
            .iter()
            .zip(&self.alphabets)
            .map(|(c, &a)| (c.support_tag, a))
            .collect();
        Ok(LearnerState::new(Model::RuleTable(RuleTableState::new(
            self.label_space.k(),
            alph,
        )?)))
    }

    fn sample(&self, n: usize, from_mixture: bool, rng: &mut ChaCha8Rng) -> Vec<Example> {
        let weights = WeightedIndex::new(self.components.iter().map(|c| c.weight))
            .expect("weights validated at construction");
        (0..n)
            .map(|_| {
                let j = match (from_mixture, self.trained_component) {
                    (false, Some(j)) => j,
                    _ => weights.sample(rng),
                };
                self.example(j, rng.gen_range(0..self.support_size))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouponWorld {
    pub label_space: LabelSpace,
    pub concept_labels: Vec<u32>,
}

impl CouponWorld {
    fn generate(concepts: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let label_space = LabelSpace::new(k)?;
        if concepts == 0 {
            return Err(EdlError::Argument("need at least one concept".into()));
        }
        let concept_labels = (0..concepts).map(|_| rng.gen_range(0..k as u32)).collect();
        Ok(Self {
            label_space,
            concept_labels,
        })
    }

    pub fn concepts(&self) -> usize {
        self.concept_labels.len()
    }

    pub fn example(&self, concept: usize) -> Example {
        Example::new(Input::Token(concept as u64), self.concept_labels[concept] as usize)
    }
}

/// Each record is two scored tokens: a format token whose label never
/// changes, then a capability token whose label depends on its concept.
#[derive(Debug, Clone, PartialEq)]
pub struct FormatWorld {
    pub label_space: LabelSpace,
    pub format_label: usize,
    pub concept_labels: Vec<u32>,
}

impl FormatWorld {
    fn generate(concepts: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let label_space = LabelSpace::new(k)?;
        if concepts == 0 {
            return Err(EdlError::Argument("need at least one concept".into()));
        }
        Ok(Self {
            label_space,
            format_label: rng.gen_range(0..k),
            concept_labels: (0..concepts).map(|_| rng.gen_range(0..k as u32)).collect(),
        })
    }

    fn format_example(&self) -> Example {
        Example::new(
            Input::Tagged {
                tag: FORMAT_TAG,
                index: 0,
            },
            self.format_label,
        )
    }

    fn capability_example(&self, concept: usize) -> Example {
        Example::new(
            Input::Tagged {
                tag: CAPABILITY_TAG,
                index: concept as u64,
            },
            self.concept_labels[concept] as usize,
        )
    }
}

/// A materialized toy world.
#[derive(Debug, Clone, PartialEq)]
pub enum ToyWorld {
    RandomLabels(RandomLabelWorld),
    Hypothesis(HypothesisWorld),
    Mixture(MixtureWorld),
    Coupon(CouponWorld),
    Format(FormatWorld),
}

impl ToyWorld {
    pub fn label_space(&self) -> LabelSpace {
        match self {
            ToyWorld::RandomLabels(w) => w.label_space,
            ToyWorld::Hypothesis(w) => LabelSpace::new(w.k()).expect("table has k >= 2"),
            ToyWorld::Mixture(w) => w.label_space,
            ToyWorld::Coupon(w) => w.label_space,
            ToyWorld::Format(w) => w.label_space,
        }
    }

    /// Draws `n` training examples (records, for the format world).
    pub fn sample_train(&self, n: usize, rng: &mut ChaCha8Rng) -> LabeledDataset {
        let examples = match self {
            ToyWorld::Mixture(w) => w.sample(n, false, rng),
            _ => self.sample_distribution(n, rng),
        };
        LabeledDataset::new(examples, self.label_space()).expect("generated labels are in range")
    }

    /// Draws `n` examples from the test distribution.
    pub fn sample_test(&self, n: usize, rng: &mut ChaCha8Rng) -> LabeledDataset {
        let examples = match self {
            ToyWorld::Mixture(w) => w.sample(n, true, rng),
            _ => self.sample_distribution(n, rng),
        };
        LabeledDataset::new(examples, self.label_space()).expect("generated labels are in range")
    }

    fn sample_distribution(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Example> {
        match self {
            ToyWorld::RandomLabels(w) => {
                let dist = WeightedIndex::new(&w.marginal).expect("marginal validated");
                (0..n)
                    .map(|_| Example::new(Input::Empty, dist.sample(rng)))
                    .collect()
            }
            ToyWorld::Hypothesis(w) => (0..n)
                .map(|_| w.example(rng.gen_range(0..w.table.input_space_size())))
                .collect(),
            ToyWorld::Mixture(w) => w.sample(n, true, rng),
            ToyWorld::Coupon(w) => (0..n)
                .map(|_| w.example(rng.gen_range(0..w.concepts())))
                .collect(),
            ToyWorld::Format(w) => (0..n)
                .flat_map(|_| {
                    let c = rng.gen_range(0..w.concept_labels.len());
                    [w.format_example(), w.capability_example(c)]
                })
                .collect(),
        }
    }

    /// The test distribution as (example, probability) pairs.
    pub fn support(&self) -> Vec<(Example, f64)> {
        match self {
            ToyWorld::RandomLabels(w) => w
                .marginal
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(y, &p)| (Example::new(Input::Empty, y), p))
                .collect(),
            ToyWorld::Hypothesis(w) => {
                let s = w.table.input_space_size();
                (0..s).map(|x| (w.example(x), 1.0 / s as f64)).collect()
            }
            ToyWorld::Mixture(w) => w
                .components
                .iter()
                .enumerate()
                .flat_map(|(j, c)| {
                    let p = c.weight / w.support_size as f64;
                    (0..w.support_size).map(move |i| (w.example(j, i), p))
                })
                .collect(),
            ToyWorld::Coupon(w) => {
                let kk = w.concepts() as f64;
                (0..w.concepts()).map(|c| (w.example(c), 1.0 / kk)).collect()
            }
            ToyWorld::Format(w) => {
                let kk = w.concept_labels.len() as f64;
                std::iter::once((w.format_example(), 0.5))
                    .chain((0..w.concept_labels.len()).map(|c| (w.capability_example(c), 0.5 / kk)))
                    .collect()
            }
        }
    }

    /// Exact expected codelength of `state` on the test distribution.
    pub fn population_loss(&self, state: &LearnerState) -> Result<f64> {
        let mut acc = CompensatedSum::new();
        for (ex, p) in self.support() {
            let dist = state.predict(&ex.input)?;
            acc.add(p * codelength(&dist, ex.label)?.nats());
        }
        Ok(acc.value())
    }

    /// Bayes-optimal expected loss L*.
    pub fn optimal_loss(&self) -> f64 {
        match self {
            ToyWorld::RandomLabels(w) => crate::stats::sum(
                w.marginal.iter().filter(|p| **p > 0.0).map(|p| -p * p.ln()),
            ),
            _ => 0.0,
        }
    }

    /// Fresh learner of `kind` matched to this world.
    pub fn initial_learner(&self, kind: LearnerKind) -> Result<LearnerState> {
        let k = self.label_space().k();
        let mismatch = || {
            EdlError::Config(format!(
                "learner `{kind}` cannot be paired with this toy world"
            ))
        };
        match (kind, self) {
            (LearnerKind::Uniform, _) => Ok(LearnerState::uniform(k)),
            (LearnerKind::Kt, _) => Ok(LearnerState::kt(k)),
            (LearnerKind::Bayesian, ToyWorld::Hypothesis(w)) => {
                Ok(LearnerState::bayesian(w.table.clone()))
            }
            (LearnerKind::ConceptTable, ToyWorld::Coupon(_)) => Ok(LearnerState::concept_table(k)),
            (LearnerKind::RuleTable, ToyWorld::Mixture(w)) => w.learner(),
            (LearnerKind::FormatKt, ToyWorld::Format(_)) => Ok(LearnerState::format_kt(k)),
            _ => Err(mismatch()),
        }
    }

    /// A learner that already predicts every label with certainty.
    pub fn oracle_learner(&self) -> Result<LearnerState> {
        match self {
            ToyWorld::Hypothesis(w) => Ok(LearnerState::bayesian(w.truth_table())),
            ToyWorld::Coupon(w) => {
                let mut s = LearnerState::concept_table(w.label_space.k());
                for c in 0..w.concepts() {
                    s.update_in_place(&w.example(c))?;
                }
                Ok(s)
            }
            ToyWorld::Mixture(w) => {
                let mut s = w.learner()?;
                for j in 0..w.components.len() {
                    s.update_in_place(&w.example(j, 0))?;
                }
                Ok(s)
            }
            _ => Err(EdlError::Config(
                "this toy world has no deterministic oracle learner".into(),
            )),
        }
    }
}

/// Training and test sets of i.i.d. uniform labels with empty inputs.
pub fn gen_random_labels(n: usize, k: usize, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    let world = ToySpec::new(ToyParams::RandomLabels { k, marginal: None }, seed).build()?;
    let mut train_rng = rng_from(&[seed, 1]);
    let mut test_rng = rng_from(&[seed, 2]);
    Ok((world.sample_train(n, &mut train_rng), world.sample_test(n, &mut test_rng)))
}

/// Balanced hypothesis class plus its diagnostic example.
pub fn gen_hypothesis_collapse(
    m: usize,
    k: usize,
    input_space_size: usize,
    seed: u64,
) -> Result<(HypothesisWorld, Example)> {
    let spec = ToySpec::new(
        ToyParams::HypothesisCollapse {
            m,
            k,
            input_space_size,
            tables: TableStyle::Balanced,
        },
        seed,
    );
    match spec.build()? {
        ToyWorld::Hypothesis(w) => {
            let x = w.diagnostic_input.expect("balanced tables have a diagnostic input");
            let ex = w.example(x);
            Ok((w, ex))
        }
        _ => unreachable!(),
    }
}

/// Mixture world plus `n` training examples (from `trained_component` only,
/// when given, otherwise from the whole mixture).
pub fn gen_disjoint_mixture(
    k: usize,
    components: Vec<MixtureComponent>,
    n: usize,
    trained_component: Option<usize>,
    seed: u64,
) -> Result<(MixtureWorld, LabeledDataset)> {
    let spec = ToySpec::new(
        ToyParams::DisjointMixture {
            k,
            components,
            support_size: default_support_size(),
            trained_component,
        },
        seed,
    );
    let world = spec.build()?;
    let train = world.sample_train(n, &mut rng_from(&[seed, 1]));
    match world {
        ToyWorld::Mixture(w) => Ok((w, train)),
        _ => unreachable!(),
    }
}

/// `n` draws of concepts uniform on `0..concepts`, each with a fixed,
/// seed-chosen label.
pub fn gen_coupon(concepts: usize, n: usize, k: usize, seed: u64) -> Result<LabeledDataset> {
    let world = ToySpec::new(ToyParams::CouponCollector { concepts, k }, seed).build()?;
    Ok(world.sample_train(n, &mut rng_from(&[seed, 1])))
}

/// Expected EDL of one-shot concept learning with `concepts` concepts worth
/// `delta_nats` each: Δ[K(1 − e^{−n/K}) − n e^{−n/K}].
pub fn oracle_coupon_edl(n: f64, concepts: f64, delta_nats: f64) -> f64 {
    let decay = (-n / concepts).exp();
    delta_nats * (concepts * (1.0 - decay) - n * decay)
}

/// Leading-order small-n form of [`oracle_coupon_edl`]: Δn²/(2K).
pub fn oracle_coupon_edl_small_n(n: f64, concepts: f64, delta_nats: f64) -> f64 {
    delta_nats * n * n / (2.0 * concepts)
}

/// u = n/K maximizing expected EDL per example, the root of e^u = 1 + u + u².
pub fn coupon_peak_ratio() -> f64 {
    let mut u: f64 = 1.8;
    for _ in 0..50 {
        let f = u.exp() - 1.0 - u - u * u;
        let df = u.exp() - 1.0 - 2.0 * u;
        u -= f / df;
    }
    u
}

/// Expected number of distinct concepts after n uniform draws.
pub fn expected_coverage(n: u64, concepts: u64) -> f64 {
    let q = 1.0 - 1.0 / concepts as f64;
    concepts as f64 * (1.0 - q.powf(n as f64))
}

/// Distribution of the number of distinct concepts covered after each of
/// 0..=n uniform draws: row i holds P(c covered after i draws) for c in 0..=K.
pub fn coverage_distribution(concepts: usize, n: usize) -> Vec<Vec<f64>> {
    let kk = concepts as f64;
    let mut rows = Vec::with_capacity(n + 1);
    let mut p = vec![0.0; concepts + 1];
    p[0] = 1.0;
    rows.push(p.clone());
    for _ in 0..n {
        let mut next = vec![0.0; concepts + 1];
        for c in 0..=concepts {
            if p[c] == 0.0 {
                continue;
            }
            next[c] += p[c] * c as f64 / kk;
            if c < concepts {
                next[c + 1] += p[c] * (kk - c as f64) / kk;
            }
        }
        p = next;
        rows.push(p.clone());
    }
    rows
}

/// Expected population loss of the concept table after i draws, i in 0..=n,
/// by enumeration over coverage counts.
pub fn coupon_expected_losses(concepts: usize, n: usize, delta_nats: f64) -> Vec<f64> {
    let kk = concepts as f64;
    coverage_distribution(concepts, n)
        .iter()
        .map(|row| {
            delta_nats
                * crate::stats::sum(
                    row.iter().enumerate().map(|(c, p)| p * (1.0 - c as f64 / kk)),
                )
        })
        .collect()
}

/// Exact expected EDL of the concept table at finite K, from the coverage
/// enumeration: Σ_{i<n} E[L(θ_i)] − n·E[L(θ_n)].
pub fn coupon_expected_edl_exact(concepts: usize, n: usize, delta_nats: f64) -> f64 {
    let losses = coupon_expected_losses(concepts, n, delta_nats);
    crate::stats::sum(losses[..n].iter().copied()) - n as f64 * losses[n]
}

pub fn harmonic(n: u64) -> f64 {
    (1..=n).rev().map(|i| 1.0 / i as f64).sum()
}

/// Parameters of the format-plus-capability learning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormatTaskParams {
    pub n_format: f64,
    pub n_capability: f64,
    pub format_loss0: f64,
    pub capability_loss0: f64,
}

impl FormatTaskParams {
    pub fn new(n_format: f64, n_capability: f64, format_loss0: f64, capability_loss0: f64) -> Result<Self> {
        if !(n_format > 0.0 && n_capability > 0.0) || n_format > n_capability {
            return Err(EdlError::Argument(
                "need 0 < n_format <= n_capability".into(),
            ));
        }
        if !(format_loss0 >= 0.0 && capability_loss0 >= 0.0) {
            return Err(EdlError::Argument("initial losses must be non-negative".into()));
        }
        Ok(Self {
            n_format,
            n_capability,
            format_loss0,
            capability_loss0,
        })
    }

    /// Per-example test loss after n examples under linear learning.
    pub fn linear_test_loss(&self, n: f64) -> f64 {
        self.format_loss0 * (1.0 - n / self.n_format).max(0.0)
            + self.capability_loss0 * (1.0 - n / self.n_capability).max(0.0)
    }

    fn regime1(&self, n: f64) -> f64 {
        n * n * (self.format_loss0 / self.n_format + self.capability_loss0 / self.n_capability)
    }

    fn saturated(&self) -> f64 {
        0.5 * (self.n_format * self.format_loss0 + self.n_capability * self.capability_loss0)
    }
}

/// Which piece of the format curve an n falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatRegime {
    BothLearning,
    FormatLearned,
    Saturated,
}

pub fn format_regime(n: f64, p: &FormatTaskParams) -> FormatRegime {
    if n < p.n_format {
        FormatRegime::BothLearning
    } else if n <= p.n_capability {
        FormatRegime::FormatLearned
    } else {
        FormatRegime::Saturated
    }
}

/// Piecewise expected EDL of the format task: n²(L_F0/n_F + L_C0/n_C)
/// below n_F, (n_F L_F0 + n_C L_C0)/2 above n_C, and a straight line
/// between the two endpoint values in between (that middle piece is only
/// an interpolation).
pub fn oracle_format_edl(n: f64, p: &FormatTaskParams) -> f64 {
    match format_regime(n, p) {
        FormatRegime::BothLearning => p.regime1(n),
        FormatRegime::Saturated => p.saturated(),
        FormatRegime::FormatLearned => {
            let lo = p.regime1(p.n_format);
            let hi = p.saturated();
            if p.n_capability == p.n_format {
                return hi;
            }
            lo + (hi - lo) * (n - p.n_format) / (p.n_capability - p.n_format)
        }
    }
}

/// Closed-form curve over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyOracleCurve {
    pub n_values: Vec<u64>,
    pub expected_edl_nats: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime_labels: Option<Vec<FormatRegime>>,
}

pub fn coupon_curve(n_values: &[u64], concepts: f64, delta_nats: f64) -> ToyOracleCurve {
    ToyOracleCurve {
        n_values: n_values.to_vec(),
        expected_edl_nats: n_values
            .iter()
            .map(|&n| oracle_coupon_edl(n as f64, concepts, delta_nats))
            .collect(),
        regime_labels: None,
    }
}

pub fn format_curve(n_values: &[u64], p: &FormatTaskParams) -> ToyOracleCurve {
    ToyOracleCurve {
        n_values: n_values.to_vec(),
        expected_edl_nats: n_values.iter().map(|&n| oracle_format_edl(n as f64, p)).collect(),
        regime_labels: Some(n_values.iter().map(|&n| format_regime(n as f64, p)).collect()),
    }
}

/// Two-label scripted learner whose i-th codelength on the target label is
/// `schedule[i]`; after the schedule it emits `terminal`.
pub fn scripted_learner(schedule: Vec<f64>, terminal: f64) -> Result<LearnerState> {
    Ok(LearnerState::new(Model::Scripted(ScriptedState::new(2, schedule, terminal)?)))
}

/// Per-step losses L_F0(1 − (i+½)/n_F)⁺ + L_C0(1 − (i+½)/n_C)⁺ for i < n:
/// linear learning of both components, sampled at step midpoints.
pub fn linear_format_schedule(n: usize, p: &FormatTaskParams) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = i as f64 + 0.5;
            p.format_loss0 * (1.0 - t / p.n_format).max(0.0)
                + p.capability_loss0 * (1.0 - t / p.n_capability).max(0.0)
        })
        .collect()
}

/// Dataset of `n` examples that the scripted learner scores on label 0.
pub fn scripted_dataset(n: usize) -> LabeledDataset {
    LabeledDataset::new(
        vec![Example::new(Input::Empty, 0); n],
        LabelSpace::new(2).expect("k = 2"),
    )
    .expect("label 0 is valid")
}

/// `records` format/capability pairs (2·records scored tokens).
pub fn gen_format_task(records: usize, concepts: usize, k: usize, seed: u64) -> Result<LabeledDataset> {
    let world = ToySpec::new(ToyParams::FormatLearning { concepts, k }, seed).build()?;
    Ok(world.sample_train(records, &mut rng_from(&[seed, 1])))
}
