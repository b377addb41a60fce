use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use edl_core::codec::{decode_labels, encode_with_state, CodecConfig, EncodedStream};
use edl_core::experiments::{
    algorithm_dependence_study, emit_results, oracle_edl, ordering_study, run_sweep,
    variance_study, with_threads, write_json, Evaluation, LearnerConfig, OutputFormat,
    SeparableTask, SweepConfig,
};
use edl_core::stats::rng_from;
use edl_core::{
    EdlError, Input, LabelSpace, LabeledDataset, LearnerState, StoppingRule, ToySpec, ToyWorld,
};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "edl", version, about = "Prequential codelength experiments and label codec")]
struct Cli {
    /// Worker threads for parallel sweeps (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config record.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the one in the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Clone)]
struct CodecArgs {
    /// JSON array of inputs. Omit to read `--config` as a toy data record.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Toy data record: `{"spec": ..., "n": ...}`.
    #[arg(long, conflicts_with = "input")]
    config: Option<PathBuf>,
    /// Learner name (uniform, kt, bayesian, concept_table, rule_table, format_kt, softmax, oracle).
    #[arg(long, default_value = "kt")]
    learner: String,
    /// World and sampling seed for toy data records.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    freq_bits: u32,
    /// Label alphabet size when inputs come from a file (defaults to max label + 1).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Run an EDL sweep over an n-grid and seeds.
    Sweep(RunArgs),
    /// Variance of EDL across seeds at doubling n.
    Variance(RunArgs),
    /// MDL under many permutations of one dataset.
    Ordering(RunArgs),
    /// Compare two learners on the same data.
    Algdep(RunArgs),
    /// Closed-form expected EDL over an n-grid.
    Oracle(RunArgs),
    /// Encode labels into a stream file.
    Encode {
        #[command(flatten)]
        codec: CodecArgs,
        /// JSON array of labels (required with `--input`).
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Decode a stream file back to labels.
    Decode {
        #[command(flatten)]
        codec: CodecArgs,
        /// Stream file.
        #[arg(long)]
        stream: PathBuf,
        /// Where to write the JSON label array (stdout if omitted).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Where a single dataset comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
enum DataSource {
    Toy { spec: ToySpec, n: usize, seed: u64 },
    Separable { k: usize, d: usize, margin: f64, n: usize, seed: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OrderingConfig {
    data: DataSource,
    learner: LearnerConfig,
    permutation_seeds: Vec<u64>,
    #[serde(default)]
    stem: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AlgdepConfig {
    data: DataSource,
    learner_a: LearnerConfig,
    learner_b: LearnerConfig,
    #[serde(default = "StoppingRule::single_pass")]
    stopping: StoppingRule,
    #[serde(default)]
    seed: u64,
    /// Held-out size when the population loss is not enumerable.
    #[serde(default = "default_test_size")]
    test_size: usize,
    #[serde(default)]
    stem: Option<String>,
}

fn default_test_size() -> usize {
    2000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OracleConfig {
    spec: ToySpec,
    learner: LearnerConfig,
    n_grid: Vec<usize>,
    #[serde(default)]
    stem: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ToyData {
    spec: ToySpec,
    n: usize,
}

#[derive(Serialize)]
struct OraclePoint {
    n: usize,
    expected_edl_nats: Option<f64>,
}

struct Prepared {
    data: LabeledDataset,
    world: Option<ToyWorld>,
    task: Option<SeparableTask>,
}

impl Prepared {
    fn learner(&self, cfg: &LearnerConfig) -> edl_core::Result<LearnerState> {
        match (&self.world, &self.task, cfg) {
            (Some(w), _, c) => c.build(w),
            (None, Some(t), LearnerConfig::Softmax { learning_rate }) => t.learner(*learning_rate),
            (None, Some(t), LearnerConfig::Kt) => Ok(LearnerState::kt(t.k)),
            (None, Some(t), LearnerConfig::Uniform) => Ok(LearnerState::uniform(t.k)),
            (None, _, c) => Err(EdlError::Config(format!(
                "learner {} cannot run on feature data",
                c.name()
            ))),
        }
    }
}

fn prepare(source: &DataSource) -> edl_core::Result<Prepared> {
    match source {
        DataSource::Toy { spec, n, seed } => {
            let world = spec.build_salted(*seed)?;
            let data = world.sample_train(*n, &mut rng_from(&[spec.seed, *n as u64, *seed, 1]));
            Ok(Prepared { data, world: Some(world), task: None })
        }
        DataSource::Separable { k, d, margin, n, seed } => {
            let task = SeparableTask::new(*k, *d, *margin, *seed)?;
            let data = task.sample(*n, *seed);
            Ok(Prepared { data, world: None, task: Some(task) })
        }
    }
}

fn read_config(path: &Path) -> edl_core::Result<String> {
    fs::read_to_string(path).map_err(|e| EdlError::Config(format!("{}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = read_config(path)?;
    serde_json::from_str(&text)
        .map_err(|e| EdlError::Config(format!("{}: {e}", path.display())).into())
}

fn out_dir(args: &RunArgs, configured: Option<&PathBuf>) -> PathBuf {
    args.out_dir.clone().or_else(|| configured.cloned()).unwrap_or_else(|| PathBuf::from("."))
}

fn announce(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn sweep(args: &RunArgs) -> anyhow::Result<()> {
    let cfg = SweepConfig::from_json(&read_config(&args.config)?)?;
    let rows = run_sweep(&cfg)?;
    let format = match args.format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    };
    let dir = out_dir(args, cfg.outputs.dir.as_ref());
    announce(&emit_results(&rows, &dir, &cfg.outputs.stem, format)?);
    Ok(())
}

fn variance(args: &RunArgs) -> anyhow::Result<()> {
    let cfg = SweepConfig::from_json(&read_config(&args.config)?)?;
    let table = variance_study(&cfg)?;
    let dir = out_dir(args, cfg.outputs.dir.as_ref());
    fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{}_variance.json", cfg.outputs.stem));
    write_json(&path, &table)?;
    announce(&[path]);
    Ok(())
}

fn ordering(args: &RunArgs) -> anyhow::Result<()> {
    let cfg: OrderingConfig = read_json(&args.config)?;
    let prepared = prepare(&cfg.data)?;
    let learner = prepared.learner(&cfg.learner)?;
    let table = ordering_study(&prepared.data, &learner, &cfg.permutation_seeds)?;
    let dir = out_dir(args, None);
    fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{}_ordering.json", cfg.stem.as_deref().unwrap_or("study")));
    write_json(&path, &table)?;
    announce(&[path]);
    Ok(())
}

fn algdep(args: &RunArgs) -> anyhow::Result<()> {
    let cfg: AlgdepConfig = read_json(&args.config)?;
    cfg.stopping.validate()?;
    let prepared = prepare(&cfg.data)?;
    let a = prepared.learner(&cfg.learner_a)?;
    let b = prepared.learner(&cfg.learner_b)?;
    let held_out;
    let eval = match (&prepared.world, &prepared.task) {
        (Some(w), _) => Evaluation::Population(w),
        (None, Some(t)) => {
            held_out = t.sample(cfg.test_size, cfg.seed ^ 0x7E57);
            Evaluation::HeldOut(&held_out)
        }
        (None, None) => unreachable!("every data source yields a world or a task"),
    };
    let cmp = algorithm_dependence_study(&prepared.data, &a, &b, &cfg.stopping, cfg.seed, eval)?;
    let dir = out_dir(args, None);
    fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{}_algdep.json", cfg.stem.as_deref().unwrap_or("study")));
    write_json(&path, &cmp)?;
    announce(&[path]);
    Ok(())
}

fn oracle(args: &RunArgs) -> anyhow::Result<()> {
    let cfg: OracleConfig = read_json(&args.config)?;
    let world = cfg.spec.build()?;
    cfg.learner.build(&world)?;
    let points: Vec<OraclePoint> = cfg
        .n_grid
        .iter()
        .map(|&n| OraclePoint { n, expected_edl_nats: oracle_edl(&world, &cfg.learner, n) })
        .collect();
    if points.iter().all(|p| p.expected_edl_nats.is_none()) {
        return Err(EdlError::Config(format!(
            "no closed form for learner {} on {}",
            cfg.learner.name(),
            cfg.spec.kind_name()
        ))
        .into());
    }
    let dir = out_dir(args, None);
    fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{}_oracle.json", cfg.stem.as_deref().unwrap_or("study")));
    write_json(&path, &points)?;
    announce(&[path]);
    Ok(())
}

fn learner_config(args: &CodecArgs) -> anyhow::Result<LearnerConfig> {
    let text = if args.learner == "softmax" {
        format!(r#"{{"kind":"softmax","learning_rate":{}}}"#, args.learning_rate)
    } else {
        format!(r#"{{"kind":"{}"}}"#, args.learner)
    };
    serde_json::from_str(&text)
        .map_err(|_| EdlError::Config(format!("unknown learner {:?}", args.learner)).into())
}

/// Inputs, label space and initial learner shared by encoder and decoder.
fn codec_context(args: &CodecArgs, labels: Option<&[usize]>) -> anyhow::Result<(Vec<Input>, LearnerState, Option<Vec<usize>>)> {
    let learner = learner_config(args)?;
    if let Some(path) = &args.input {
        let inputs: Vec<Input> = read_json(path)?;
        let k = match (args.k, labels) {
            (Some(k), _) => k,
            (None, Some(l)) => l.iter().max().map_or(2, |m| (m + 1).max(2)),
            (None, None) => return Err(EdlError::Config("--k is required to decode file inputs".into()).into()),
        };
        let state = match learner {
            LearnerConfig::Uniform => LearnerState::uniform(k),
            LearnerConfig::Kt => LearnerState::kt(k),
            LearnerConfig::ConceptTable => LearnerState::concept_table(k),
            LearnerConfig::FormatKt => LearnerState::format_kt(k),
            LearnerConfig::Softmax { learning_rate } => {
                let d = match inputs.first() {
                    Some(Input::Features(x)) => x.len(),
                    _ => return Err(EdlError::Config("softmax needs feature inputs".into()).into()),
                };
                LearnerState::softmax(k, d, learning_rate)?
            }
            other => {
                return Err(EdlError::Config(format!(
                    "learner {} needs a toy data record (--config)",
                    other.name()
                ))
                .into())
            }
        };
        return Ok((inputs, state, None));
    }
    let path = args
        .config
        .as_ref()
        .ok_or_else(|| EdlError::Config("either --input or --config is required".into()))?;
    let toy: ToyData = read_json(path)?;
    let prepared = prepare(&DataSource::Toy { spec: toy.spec, n: toy.n, seed: args.seed })?;
    let state = prepared.learner(&learner)?;
    Ok((prepared.data.inputs(), state, Some(prepared.data.labels())))
}

fn encode(args: &CodecArgs, labels_path: Option<&Path>, output: &Path) -> anyhow::Result<()> {
    let file_labels: Option<Vec<usize>> = labels_path.map(read_json).transpose()?;
    if args.input.is_some() && file_labels.is_none() {
        return Err(EdlError::Config("--labels is required with --input".into()).into());
    }
    let (inputs, initial, toy_labels) = codec_context(args, file_labels.as_deref())?;
    let labels = file_labels.or(toy_labels).expect("labels come from a file or a toy record");
    if labels.len() != inputs.len() {
        return Err(EdlError::Config(format!(
            "{} inputs but {} labels",
            inputs.len(),
            labels.len()
        ))
        .into());
    }
    let data = LabeledDataset::new(
        inputs.into_iter().zip(labels).map(|(x, y)| edl_core::Example::new(x, y)).collect(),
        LabelSpace::new(initial.k())?,
    )?;
    let config = CodecConfig::new(args.freq_bits, 64)?;
    let (stream, _) = encode_with_state(&data, &initial, &config)?;
    fs::write(output, stream.to_bytes()).with_context(|| format!("writing {}", output.display()))?;
    println!("{} labels -> {} payload bits", data.len(), stream.payload_bits);
    Ok(())
}

fn decode(args: &CodecArgs, stream_path: &Path, output: Option<&Path>) -> anyhow::Result<()> {
    let bytes = fs::read(stream_path).with_context(|| format!("reading {}", stream_path.display()))?;
    let stream = EncodedStream::from_bytes(&bytes)?;
    let args_k = CodecArgs { k: args.k.or(Some(stream.header.k as usize)), ..args.clone() };
    let (inputs, initial, _) = codec_context(&args_k, None)?;
    let (labels, _) = decode_labels(&inputs, &stream, &initial)?;
    let text = serde_json::to_string(&labels)? + "\n";
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let threads = cli.threads;
    with_threads(threads, move || match &cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Variance(a) => variance(a),
        Command::Ordering(a) => ordering(a),
        Command::Algdep(a) => algdep(a),
        Command::Oracle(a) => oracle(a),
        Command::Encode { codec, labels, output } => encode(codec, labels.as_deref(), output),
        Command::Decode { codec, stream, output } => decode(codec, stream, output.as_deref()),
    })?
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<EdlError>() {
        Some(EdlError::Config(_)) => 2,
        Some(EdlError::InvariantViolation(_)) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
