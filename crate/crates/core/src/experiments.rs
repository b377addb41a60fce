//! Seeded experiment harness: EDL sweeps over toy worlds, variance and
//! ordering studies, learner comparisons, and CSV/JSON emission.
//!
//! Every run draws from a generator seeded by (spec seed, n, seed), and the
//! world tables from (spec seed, seed), so extending a grid never perturbs
//! existing rows. Rows run in parallel and are sorted by (n, seed), so
//! results do not depend on thread count.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codelength::{codelength, Example, Input, LabelSpace, LabeledDataset};
use crate::error::{EdlError, Result};
use crate::learners::{LearnerKind, LearnerState, DEFAULT_LEARNING_RATE};
use crate::prequential::{
    continue_training, edl, regret_vs_comparator, run_prequential, sdl, test_loss, EdlReport,
    StoppingRule,
};
use crate::stats::{mean, mix_seed, rng_from, sample_variance, standard_error, CompensatedSum};
use crate::toymodels::{oracle_coupon_edl, ToyParams, ToySpec, ToyWorld};

fn default_learning_rate() -> f64 {
    DEFAULT_LEARNING_RATE
}

/// Learner identifier plus hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerConfig {
    Uniform,
    Kt,
    Bayesian,
    ConceptTable,
    RuleTable,
    FormatKt,
    Softmax {
        #[serde(default = "default_learning_rate")]
        learning_rate: f64,
    },
    /// A learner that already knows the generating rule.
    Oracle,
}

impl LearnerConfig {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerConfig::Uniform => "uniform",
            LearnerConfig::Kt => "kt",
            LearnerConfig::Bayesian => "bayesian",
            LearnerConfig::ConceptTable => "concept_table",
            LearnerConfig::RuleTable => "rule_table",
            LearnerConfig::FormatKt => "format_kt",
            LearnerConfig::Softmax { .. } => "softmax",
            LearnerConfig::Oracle => "oracle",
        }
    }

    fn kind(&self) -> Option<LearnerKind> {
        Some(match self {
            LearnerConfig::Uniform => LearnerKind::Uniform,
            LearnerConfig::Kt => LearnerKind::Kt,
            LearnerConfig::Bayesian => LearnerKind::Bayesian,
            LearnerConfig::ConceptTable => LearnerKind::ConceptTable,
            LearnerConfig::RuleTable => LearnerKind::RuleTable,
            LearnerConfig::FormatKt => LearnerKind::FormatKt,
            LearnerConfig::Softmax { .. } | LearnerConfig::Oracle => return None,
        })
    }

    /// Initial state matched to `world`.
    pub fn build(&self, world: &ToyWorld) -> Result<LearnerState> {
        match self {
            LearnerConfig::Oracle => world.oracle_learner(),
            LearnerConfig::Softmax { .. } => Err(EdlError::Config(
                "the softmax learner needs feature inputs, which no toy world provides".into(),
            )),
            other => world.initial_learner(other.kind().expect("table learners have a kind")),
        }
    }
}

fn default_batch_size() -> usize {
    1
}

fn default_stem() -> String {
    "sweep".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_stem")]
    pub stem: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: None,
            stem: default_stem(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub spec: ToySpec,
    pub n_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub learner: LearnerConfig,
    #[serde(default = "StoppingRule::single_pass")]
    pub stopping: StoppingRule,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Size of a sampled test set. Absent: exact population loss.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_size: Option<usize>,
    /// Wall time is left out by default so output files are reproducible.
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default)]
    pub outputs: OutputSpec,
}

impl SweepConfig {
    pub fn new(spec: ToySpec, n_grid: Vec<usize>, seeds: Vec<u64>, learner: LearnerConfig) -> Self {
        Self {
            spec,
            n_grid,
            seeds,
            learner,
            stopping: StoppingRule::single_pass(),
            batch_size: 1,
            test_size: None,
            record_wall_time: false,
            outputs: OutputSpec::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| EdlError::Config(e.to_string()))
    }

    /// Checks the grid, seeds, and learner/world pairing.
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.seeds.is_empty() {
            return Err(EdlError::Config("n_grid and seeds must be non-empty".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EdlError::Config("n_grid must be strictly increasing".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(EdlError::Config("seeds must be distinct".into()));
        }
        if self.batch_size == 0 {
            return Err(EdlError::Config("batch_size must be at least 1".into()));
        }
        if self.test_size == Some(0) {
            return Err(EdlError::Config("test_size must be positive".into()));
        }
        self.stopping.validate()?;
        let world = self.spec.build_salted(self.seeds[0]).map_err(as_config)?;
        self.learner.build(&world).map_err(as_config)?;
        Ok(())
    }
}

fn as_config(e: EdlError) -> EdlError {
    match e {
        EdlError::Argument(m) => EdlError::Config(m),
        other => other,
    }
}

/// One (n, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub report: EdlReport,
    pub oracle_edl_nats: Option<f64>,
    pub wall_time_ms: Option<u64>,
}

/// Closed-form expected EDL of `learner` on `world` after n draws, where
/// one is known.
pub fn oracle_edl(world: &ToyWorld, learner: &LearnerConfig, n: usize) -> Option<f64> {
    let nf = n as f64;
    match (learner, world) {
        (LearnerConfig::Oracle, _) => Some(0.0),
        (LearnerConfig::Uniform, ToyWorld::RandomLabels(w))
            if w.marginal.iter().all(|&p| p == w.marginal[0]) =>
        {
            Some(0.0)
        }
        (LearnerConfig::ConceptTable, ToyWorld::Coupon(w)) => Some(oracle_coupon_edl(
            nf,
            w.concepts() as f64,
            (w.label_space.k() as f64).ln(),
        )),
        (LearnerConfig::RuleTable, ToyWorld::Mixture(w)) => {
            let deltas = w.components.iter().map(|c| c.delta_nats);
            let weights = w.components.iter().map(|c| c.weight);
            let terms: Vec<(f64, f64)> = weights.zip(deltas).collect();
            Some(match w.trained_component {
                // Each rule costs Δ_j at its first sighting; unseen rules cost
                // Δ_j at test time with probability π_j.
                None => crate::stats::sum(terms.iter().map(|&(p, d)| {
                    let miss = (1.0 - p).powf(nf);
                    d * ((1.0 - miss) - nf * p * miss)
                })),
                Some(j) if n > 0 => {
                    let untrained = crate::stats::sum(
                        terms.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, &(p, d))| p * d),
                    );
                    terms[j].1 - nf * untrained
                }
                Some(_) => 0.0,
            })
        }
        _ => None,
    }
}

fn check_row(row: &SweepRow, train_loss_sum: f64, exact_test: bool) -> Result<()> {
    let r = &row.report;
    let scale = 1e-9 + 1e-12 * r.mdl_nats.abs();
    let diag = |what: &str| {
        EdlError::InvariantViolation(format!("n={} seed={}: {what}: {r:?}", row.n, row.seed))
    };
    let regret = r.regret_nats.unwrap_or(0.0);
    if (r.mdl_nats - train_loss_sum - regret).abs() > scale {
        return Err(diag("MDL != comparator loss + regret"));
    }
    if (r.edl_nats - (r.mdl_nats - r.n as f64 * r.test_loss_nats)).abs()
        > scale + 1e-12 * r.n as f64 * r.test_loss_nats
    {
        return Err(diag("EDL != MDL - n * test loss"));
    }
    if let (true, Some(s)) = (exact_test, r.sdl_nats) {
        if r.edl_nats > s + 1e-9 {
            return Err(diag("EDL exceeds SDL"));
        }
    }
    Ok(())
}

fn run_row(config: &SweepConfig, n: usize, seed: u64) -> Result<SweepRow> {
    let spec_seed = config.spec.seed;
    let world = config.spec.build_salted(seed)?;
    let train = world.sample_train(n, &mut rng_from(&[spec_seed, n as u64, seed, 1]));
    let initial = config.learner.build(&world)?;
    let start = Instant::now();
    let run = run_prequential(&train, &initial, config.batch_size)?;
    let theta = continue_training(
        &run.final_state,
        &train,
        &config.stopping,
        mix_seed(&[spec_seed, n as u64, seed, 2]),
    )?;
    let test = match config.test_size {
        None => world.population_loss(&theta)?,
        Some(size) => {
            let held = world.sample_test(size, &mut rng_from(&[spec_seed, n as u64, seed, 3]));
            test_loss(&theta, &held)?
        }
    };
    let regret = regret_vs_comparator(&run.trace, &theta, &train)?;
    let train_loss_sum = score_sum(&theta, &train)?;
    let report = edl(&run.trace, test, train.token_count(), theta.parameter_count())?
        .with_regret(regret)
        .with_sdl(sdl(&run.trace, world.optimal_loss()));
    let wall = start.elapsed().as_millis() as u64;
    let row = SweepRow {
        n,
        seed,
        report,
        oracle_edl_nats: oracle_edl(&world, &config.learner, n),
        wall_time_ms: config.record_wall_time.then_some(wall),
    };
    check_row(&row, train_loss_sum, config.test_size.is_none())?;
    Ok(row)
}

/// Σ ℓ(state; x_i, y_i) over a dataset.
pub fn score_sum(state: &LearnerState, dataset: &LabeledDataset) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    for ex in dataset.examples() {
        acc.add(codelength(&state.predict(&ex.input)?, ex.label)?.nats());
    }
    Ok(acc.value())
}

/// Runs every (n, seed) pair; rows come back sorted by (n, seed).
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let pairs: Vec<(usize, u64)> = config
        .n_grid
        .iter()
        .flat_map(|&n| config.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let mut rows = pairs
        .par_iter()
        .map(|&(n, s)| run_row(config, n, s))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| (r.n, r.seed));
    Ok(rows)
}

/// Runs `f` on a dedicated pool of `threads` workers (rayon's default when
/// `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(EdlError::Config("thread count must be positive".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| EdlError::Config(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Per-n aggregate of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub seeds: usize,
    pub mean_edl_nats: f64,
    pub se_edl_nats: f64,
    pub mean_edl_bits_per_example: f64,
    pub mean_mdl_nats: f64,
    pub oracle_edl_nats: Option<f64>,
}

pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut out: Vec<SummaryRow> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let n = rows[start].n;
        let end = start + rows[start..].iter().take_while(|r| r.n == n).count();
        let group = &rows[start..end];
        let edls: Vec<f64> = group.iter().map(|r| r.report.edl_nats).collect();
        let per_ex: Vec<f64> = group.iter().map(|r| r.report.edl_bits_per_example).collect();
        let mdls: Vec<f64> = group.iter().map(|r| r.report.mdl_nats).collect();
        let oracles: Option<Vec<f64>> = group.iter().map(|r| r.oracle_edl_nats).collect();
        out.push(SummaryRow {
            n,
            seeds: group.len(),
            mean_edl_nats: mean(&edls),
            se_edl_nats: standard_error(&edls),
            mean_edl_bits_per_example: mean(&per_ex),
            mean_mdl_nats: mean(&mdls),
            oracle_edl_nats: oracles.map(|o| mean(&o)),
        });
        start = end;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Serialize)]
struct CsvRow {
    n: usize,
    seed: u64,
    mdl_nats: f64,
    test_loss_nats: f64,
    edl_nats: f64,
    edl_bits_per_example: f64,
    edl_bits_per_token: f64,
    oracle_edl_nats: Option<f64>,
    wall_time_ms: Option<u64>,
}

/// Writes `{stem}.csv` (or `{stem}.json`) plus `{stem}_summary.json`.
pub fn emit_results(
    rows: &[SweepRow],
    dir: &Path,
    stem: &str,
    format: OutputFormat,
) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(EdlError::Argument("no rows to emit".into()));
    }
    fs::create_dir_all(dir)?;
    let main = match format {
        OutputFormat::Csv => {
            let path = dir.join(format!("{stem}.csv"));
            let mut w = csv::Writer::from_path(&path).map_err(csv_error)?;
            for r in rows {
                w.serialize(CsvRow {
                    n: r.n,
                    seed: r.seed,
                    mdl_nats: r.report.mdl_nats,
                    test_loss_nats: r.report.test_loss_nats,
                    edl_nats: r.report.edl_nats,
                    edl_bits_per_example: r.report.edl_bits_per_example,
                    edl_bits_per_token: r.report.edl_bits_per_token,
                    oracle_edl_nats: r.oracle_edl_nats,
                    wall_time_ms: r.wall_time_ms,
                })
                .map_err(csv_error)?;
            }
            w.flush()?;
            path
        }
        OutputFormat::Json => {
            let path = dir.join(format!("{stem}.json"));
            write_json(&path, &rows)?;
            path
        }
    };
    let summary = dir.join(format!("{stem}_summary.json"));
    write_json(&summary, &summarize(rows))?;
    Ok(vec![main, summary])
}

fn csv_error(e: csv::Error) -> EdlError {
    EdlError::Io(e.to_string())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| EdlError::Io(format!("cannot serialize results: {e}")))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub n: usize,
    pub seeds: usize,
    pub mean_edl_nats: f64,
    pub variance: f64,
    pub first_half_variance: f64,
    pub second_half_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceTable {
    pub rows: Vec<VarianceRow>,
    /// Var(EDL at n_{i+1}) / Var(EDL at n_i); absent when the denominator is 0.
    pub ratios: Vec<Option<f64>>,
}

/// Sample variance of EDL per n over seeds.
pub fn variance_study(config: &SweepConfig) -> Result<VarianceTable> {
    if config.seeds.len() < 100 {
        return Err(EdlError::Config(format!(
            "variance study needs at least 100 seeds, got {}",
            config.seeds.len()
        )));
    }
    if config.n_grid.len() < 3 || config.n_grid.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(EdlError::Config(
            "variance study needs at least 3 grid points, each double the last".into(),
        ));
    }
    let rows = run_sweep(config)?;
    let mut table = Vec::new();
    for &n in &config.n_grid {
        // Keep the configured seed order so the halves are the listed halves.
        let edls: Vec<f64> = config
            .seeds
            .iter()
            .map(|s| {
                rows.iter()
                    .find(|r| r.n == n && r.seed == *s)
                    .expect("one row per (n, seed)")
                    .report
                    .edl_nats
            })
            .collect();
        let (a, b) = edls.split_at(edls.len() / 2);
        table.push(VarianceRow {
            n,
            seeds: edls.len(),
            mean_edl_nats: mean(&edls),
            variance: sample_variance(&edls),
            first_half_variance: sample_variance(a),
            second_half_variance: sample_variance(b),
        });
    }
    let ratios = table
        .windows(2)
        .map(|w| (w[0].variance > 0.0).then(|| w[1].variance / w[0].variance))
        .collect();
    Ok(VarianceTable {
        rows: table,
        ratios,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingTable {
    pub permutation_seeds: Vec<u64>,
    pub mdl_nats: Vec<f64>,
    pub first_half_mean: f64,
    pub second_half_mean: f64,
    /// sqrt(SE_1² + SE_2²) of the two half means.
    pub pooled_se: f64,
}

impl OrderingTable {
    pub fn half_difference(&self) -> f64 {
        (self.first_half_mean - self.second_half_mean).abs()
    }

    /// Largest distance between any two per-permutation MDLs.
    pub fn spread(&self) -> f64 {
        let lo = self.mdl_nats.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.mdl_nats.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }
}

/// Order a dataset by the permutation drawn from `seed`.
pub fn permute(dataset: &LabeledDataset, seed: u64) -> Result<LabeledDataset> {
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng_from(&[seed, 0x0D]));
    dataset.permuted(&order)
}

/// MDL of `dataset` under each seeded permutation, compared across the
/// two halves of the permutation list.
pub fn ordering_study(
    dataset: &LabeledDataset,
    learner: &LearnerState,
    permutation_seeds: &[u64],
) -> Result<OrderingTable> {
    if permutation_seeds.len() < 100 {
        return Err(EdlError::Config(format!(
            "ordering study needs at least 100 permutations, got {}",
            permutation_seeds.len()
        )));
    }
    let mdl_nats = permutation_seeds
        .par_iter()
        .map(|&s| Ok(run_prequential(&permute(dataset, s)?, learner, 1)?.trace.mdl()))
        .collect::<Result<Vec<f64>>>()?;
    let (a, b) = mdl_nats.split_at(mdl_nats.len() / 2);
    Ok(OrderingTable {
        permutation_seeds: permutation_seeds.to_vec(),
        first_half_mean: mean(a),
        second_half_mean: mean(b),
        pooled_se: (standard_error(a).powi(2) + standard_error(b).powi(2)).sqrt(),
        mdl_nats,
    })
}

/// Where θ*'s test loss comes from.
#[derive(Debug, Clone, Copy)]
pub enum Evaluation<'a> {
    Population(&'a ToyWorld),
    HeldOut(&'a LabeledDataset),
}

impl Evaluation<'_> {
    fn loss(&self, state: &LearnerState) -> Result<f64> {
        match self {
            Evaluation::Population(w) => w.population_loss(state),
            Evaluation::HeldOut(d) => test_loss(state, d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmReport {
    pub learner: LearnerKind,
    pub mdl_nats: f64,
    pub test_loss_nats: f64,
    pub edl_nats: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdlOrder {
    Less,
    Equal,
    Greater,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmComparison {
    pub a: AlgorithmReport,
    pub a_prime: AlgorithmReport,
    /// MDL(A) − MDL(A′).
    pub mdl_difference: f64,
    pub edl_difference: f64,
    pub mdl_order: MdlOrder,
}

fn evaluate(
    dataset: &LabeledDataset,
    learner: &LearnerState,
    rule: &StoppingRule,
    seed: u64,
    eval: Evaluation<'_>,
) -> Result<AlgorithmReport> {
    let run = run_prequential(dataset, learner, 1)?;
    let theta = continue_training(&run.final_state, dataset, rule, seed)?;
    let loss = eval.loss(&theta)?;
    let report = edl(&run.trace, loss, dataset.token_count(), None)?;
    Ok(AlgorithmReport {
        learner: learner.kind(),
        mdl_nats: report.mdl_nats,
        test_loss_nats: loss,
        edl_nats: report.edl_nats,
    })
}

/// Runs two learners on the same ordered data and training budget.
pub fn algorithm_dependence_study(
    dataset: &LabeledDataset,
    a: &LearnerState,
    a_prime: &LearnerState,
    rule: &StoppingRule,
    seed: u64,
    eval: Evaluation<'_>,
) -> Result<AlgorithmComparison> {
    let ra = evaluate(dataset, a, rule, seed, eval)?;
    let rb = evaluate(dataset, a_prime, rule, seed, eval)?;
    let mdl_difference = ra.mdl_nats - rb.mdl_nats;
    let mdl_order = match ra.mdl_nats.total_cmp(&rb.mdl_nats) {
        std::cmp::Ordering::Less => MdlOrder::Less,
        std::cmp::Ordering::Equal => MdlOrder::Equal,
        std::cmp::Ordering::Greater => MdlOrder::Greater,
    };
    Ok(AlgorithmComparison {
        edl_difference: ra.edl_nats - rb.edl_nats,
        a: ra,
        a_prime: rb,
        mdl_difference,
        mdl_order,
    })
}

/// Linearly separable multi-class data: labels are the argmax of a fixed
/// random linear map, and draws with a score gap below `margin` are
/// rejected. The last feature is a constant 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableTask {
    pub k: usize,
    pub d: usize,
    pub margin: f64,
    weights: Vec<f64>,
}

impl SeparableTask {
    pub fn new(k: usize, d: usize, margin: f64, seed: u64) -> Result<Self> {
        LabelSpace::new(k)?;
        if d < 2 {
            return Err(EdlError::Argument("need at least 2 feature dimensions".into()));
        }
        if !(margin >= 0.0) {
            return Err(EdlError::Argument("margin must be non-negative".into()));
        }
        let mut rng = rng_from(&[seed, 0x5E9]);
        let weights = (0..k * d).map(|_| rng.sample(StandardNormal)).collect();
        Ok(Self {
            k,
            d,
            margin,
            weights,
        })
    }

    fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks(self.d)
            .map(|w| w.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Example {
        loop {
            let mut x: Vec<f64> = (0..self.d - 1).map(|_| rng.sample(StandardNormal)).collect();
            x.push(1.0);
            let s = self.scores(&x);
            let (best, top) = s
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            let second = s
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != best)
                .map(|(_, &v)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            if top - second >= self.margin {
                return Example::new(Input::Features(x), best);
            }
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> LabeledDataset {
        let mut rng = rng_from(&[seed, 0x5EA]);
        let examples = (0..n).map(|_| self.draw(&mut rng)).collect();
        LabeledDataset::new(examples, LabelSpace::new(self.k).expect("validated k"))
            .expect("labels are argmax indices")
    }

    pub fn learner(&self, learning_rate: f64) -> Result<LearnerState> {
        LearnerState::softmax(self.k, self.d, learning_rate)
    }
}

/// Mean and standard error of a per-step population-loss change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDelta {
    pub step: usize,
    pub mean_delta: f64,
    pub se: f64,
}

/// Average change in exact population loss caused by each of the first
/// `steps` updates, over `seeds` independent runs.
pub fn population_monotonicity_probe(
    spec: &ToySpec,
    learner: &LearnerConfig,
    steps: usize,
    seeds: &[u64],
) -> Result<Vec<StepDelta>> {
    let per_seed = seeds
        .par_iter()
        .map(|&seed| {
            let world = spec.build_salted(seed)?;
            let data = world.sample_train(steps, &mut rng_from(&[spec.seed, steps as u64, seed, 1]));
            let mut state = learner.build(&world)?;
            let mut prev = world.population_loss(&state)?;
            let mut deltas = Vec::with_capacity(data.len());
            for ex in data.examples() {
                state.update_in_place(ex)?;
                let cur = world.population_loss(&state)?;
                deltas.push(cur - prev);
                prev = cur;
            }
            Ok(deltas)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let len = per_seed.first().map_or(0, Vec::len);
    Ok((0..len)
        .map(|i| {
            let col: Vec<f64> = per_seed.iter().map(|d| d[i]).collect();
            StepDelta {
                step: i + 1,
                mean_delta: mean(&col),
                se: standard_error(&col),
            }
        })
        .collect())
}

/// EDL of every prefix of one sampled sequence under exact test loss:
/// entry i − 1 is MDL_i − i·L(θ_i), for prefixes of 1..=len examples.
pub fn edl_trajectory(
    world: &ToyWorld,
    learner: &LearnerState,
    data: &LabeledDataset,
) -> Result<Vec<f64>> {
    let mut state = learner.clone();
    let mut mdl = CompensatedSum::new();
    let mut out = Vec::with_capacity(data.len());
    for (i, ex) in data.examples().iter().enumerate() {
        mdl.add(codelength(&state.predict(&ex.input)?, ex.label)?.nats());
        state.update_in_place(ex)?;
        out.push(mdl.value() - (i + 1) as f64 * world.population_loss(&state)?);
    }
    Ok(out)
}

/// Mean and standard error over seeds of [`edl_trajectory`] for sequences
/// of `len` training draws.
pub fn mean_edl_trajectory(
    spec: &ToySpec,
    learner: &LearnerConfig,
    len: usize,
    seeds: &[u64],
) -> Result<Vec<(f64, f64)>> {
    let runs = seeds
        .par_iter()
        .map(|&seed| {
            let world = spec.build_salted(seed)?;
            let data = world.sample_train(len, &mut rng_from(&[spec.seed, len as u64, seed, 1]));
            edl_trajectory(&world, &learner.build(&world)?, &data)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let width = runs.first().map_or(0, Vec::len);
    Ok((0..width)
        .map(|i| {
            let col: Vec<f64> = runs.iter().map(|r| r[i]).collect();
            (mean(&col), standard_error(&col))
        })
        .collect())
}

/// Convenience: the random-label world with `k` uniform labels.
pub fn random_label_spec(k: usize, seed: u64) -> ToySpec {
    ToySpec::new(ToyParams::RandomLabels { k, marginal: None }, seed)
}
