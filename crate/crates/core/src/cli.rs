//! Command-line front end.
//!
//! Hyperparameters come from, in increasing priority: built-in defaults, a
//! dataset preset, a `key=value` config file, and flags.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use thiserror::Error;

use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
use crate::data::{build_filter_index, classify_rmp, load_dataset, write_dataset, DataError, Split, Vocab};
use crate::evaluator::{per_relation_from_ranks, rank_all, rmp_from_ranks, write_metrics_tsv, write_rmp_tsv, MetricsReport};
use crate::model::{init_parameters, HouseModel, ModelConfig, ModelError, Variant};
use crate::properties::run_property_suite;
use crate::synth::{generate_many_to_one_kg, generate_pattern_kg, ManyToOneMix, PatternMix};
use crate::trainer::{train, write_log, TrainConfig, TrainError};

pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const INVALID_VALUE: i32 = 3;
    pub const MISSING_PATH: i32 = 4;
    pub const DATA: i32 = 5;
    pub const MODEL: i32 = 6;
    pub const CHECKPOINT: i32 = 7;
    pub const IO: i32 = 8;
    pub const PROPERTY_FAILURE: i32 = 9;
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Help or version text requested; not a failure.
    #[error("{0}")]
    Help(String),
    #[error("{0}")]
    Usage(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("missing required path: {0}")]
    MissingPath(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{failed} of {total} properties failed")]
    PropertyFailure { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Help(_) => exit::OK,
            CliError::Usage(_) => exit::USAGE,
            CliError::InvalidValue(_) => exit::INVALID_VALUE,
            CliError::MissingPath(_) => exit::MISSING_PATH,
            CliError::Data(_) => exit::DATA,
            CliError::Model(_) | CliError::Train(_) => exit::MODEL,
            CliError::Checkpoint(_) => exit::CHECKPOINT,
            CliError::Io { .. } => exit::IO,
            CliError::PropertyFailure { .. } => exit::PROPERTY_FAILURE,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

#[derive(Parser, Debug)]
#[command(name = "housekge", version, about = "Householder knowledge-graph embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model on a dataset directory.
    Train(TrainArgs),
    /// Evaluate a checkpoint with filtered ranking.
    Eval(EvalArgs),
    /// Run the Householder property suite.
    TestProps(PropsArgs),
    /// Write a synthetic dataset.
    GenSynth(SynthArgs),
}

#[derive(Args, Debug, Default, Clone)]
struct HyperArgs {
    /// Dataset directory with train.txt, valid.txt and test.txt.
    #[arg(long)]
    data: Option<PathBuf>,
    /// key=value file with hyperparameters; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hyperparameter preset for a known benchmark.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Batch size.
    #[arg(long = "b", visible_alias = "batch")]
    b: Option<usize>,
    /// Negatives per positive.
    #[arg(long = "negatives", visible_alias = "l")]
    negatives: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lr: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    valid_every: Option<u64>,
    /// Evaluations without improvement before the learning rate is halved (0 disables).
    #[arg(long)]
    halve_after: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 1 gives the deterministic reference mode.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    hyper: HyperArgs,
    /// Output directory for checkpoint, log and reports.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Resume from this checkpoint instead of a fresh initialization.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Expected variant; a checkpoint of another variant is rejected.
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct PropsArgs {
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    entities: usize,
    #[arg(long, value_enum, default_value = "pattern")]
    kind: SynthKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Train,
    Valid,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Valid => Split::Valid,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Pattern,
    ManyToOne,
}

/// Hyperparameter scale for known benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Full per-entity parameter budget.
    Full,
    /// A quarter of the full budget, sized for a desktop CPU.
    Desk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Train,
    Eval,
    TestProps,
    GenSynth,
}

/// Model shape before the dataset fixes the entity and relation counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub variant: Variant,
    pub d: usize,
    pub k: usize,
    pub m: usize,
    pub seed: u64,
}

impl ModelSpec {
    pub fn n(&self) -> usize {
        self.k / 2
    }

    pub fn config(&self, num_entities: usize, num_relations: usize, gamma: f64) -> Result<ModelConfig, ModelError> {
        Ok(ModelConfig::new(self.variant, self.d, self.k, self.m, num_entities, num_relations, self.seed)?
            .with_init_gamma(gamma))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub command: CommandKind,
    pub data: Option<PathBuf>,
    pub model: ModelSpec,
    /// Whether `--variant` was given explicitly (eval checks it).
    pub variant_given: bool,
    pub train: TrainConfig,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub threads: usize,
    pub split: Split,
    pub prop_k: usize,
    pub prop_trials: usize,
    pub synth_entities: usize,
    pub synth_kind: SynthKind,
}

/// Per-entity parameter budget `d * k` of known benchmarks.
pub const BENCHMARK_BUDGETS: [(&str, usize); 5] =
    [("wn18", 1000), ("fb15k", 1200), ("wn18rr", 800), ("fb15k-237", 600), ("yago3-10", 1000)];

pub fn benchmark_budget(name: &str) -> Option<usize> {
    let key = normalize_name(name);
    BENCHMARK_BUDGETS.iter().find(|(n, _)| normalize_name(n) == key).map(|(_, b)| *b)
}

fn normalize_name(name: &str) -> String {
    name.to_ascii_lowercase().chars().filter(|c| c.is_ascii_alphanumeric()).collect()
}

/// Dataset name guessed from the last component of the data path.
fn dataset_name(path: &Path) -> Option<String> {
    path.file_name().map(|n| n.to_string_lossy().to_string())
}

/// Default values as `key=value` pairs: generic small-graph settings, or a
/// benchmark preset when the dataset name is recognized.
fn preset_values(dataset: Option<&str>, preset: Option<Preset>) -> BTreeMap<String, String> {
    let mut v: BTreeMap<String, String> = [
        ("variant", "house"),
        ("d", "16"),
        ("k", "4"),
        ("m", "1"),
        ("b", "64"),
        ("negatives", "16"),
        ("alpha", "1.0"),
        ("gamma", "6.0"),
        ("lr", "0.01"),
        ("lambda", "0.0"),
        ("max-steps", "2000"),
        ("valid-every", "500"),
        ("halve-after", "3"),
        ("seed", "0"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    let budget = dataset.and_then(benchmark_budget);
    let preset = preset.or(budget.map(|_| Preset::Full));
    if let (Some(budget), Some(preset)) = (budget, preset) {
        let k = 4;
        let scale = if preset == Preset::Desk { 4 } else { 1 };
        let wordnet = dataset.is_some_and(|d| normalize_name(d).starts_with("wn"));
        let mut set = |key: &str, val: String| {
            v.insert(key.to_string(), val);
        };
        set("k", k.to_string());
        set("d", (budget / scale / k).to_string());
        set("m", "2".into());
        set("b", if preset == Preset::Desk { "256" } else { "1000" }.into());
        set("negatives", if preset == Preset::Desk { "64" } else { "256" }.into());
        set("gamma", if wordnet { "5.0" } else { "9.0" }.into());
        set("lr", if preset == Preset::Desk { "0.003" } else { "0.001" }.into());
        set("lambda", if wordnet { "0.1" } else { "0.0" }.into());
        set("max-steps", "100000".into());
        set("valid-every", "5000".into());
    }
    v
}

fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => CliError::MissingPath(path.display().to_string()),
        _ => CliError::Io { path: path.to_path_buf(), source: e },
    })?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
        let key = k.trim().replace('_', "-");
        let key = match key.as_str() {
            "batch" => "b".to_string(),
            "l" => "negatives".to_string(),
            _ => key,
        };
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

const KNOWN_KEYS: [&str; 15] = [
    "variant", "d", "k", "m", "b", "negatives", "alpha", "gamma", "lr", "lambda", "max-steps", "valid-every",
    "halve-after", "seed", "threads",
];

fn parse_value<T: std::str::FromStr>(values: &BTreeMap<String, String>, key: &str) -> Result<T, CliError> {
    let raw = values.get(key).ok_or_else(|| CliError::Usage(format!("no value for {key}")))?;
    raw.parse().map_err(|_| CliError::InvalidValue(format!("{key}={raw}")))
}

fn hyper_spec(h: &HyperArgs) -> Result<(ModelSpec, TrainConfig, Option<usize>, bool), CliError> {
    let name = h.data.as_deref().and_then(dataset_name);
    let mut values = preset_values(name.as_deref(), h.preset);
    if let Some(path) = &h.config {
        for (k, v) in read_config_file(path)? {
            if !KNOWN_KEYS.contains(&k.as_str()) {
                return Err(CliError::Usage(format!("unknown config key {k}")));
            }
            values.insert(k, v);
        }
    }
    let flags: [(&str, Option<String>); 15] = [
        ("variant", h.variant.map(|v| v.to_string())),
        ("d", h.d.map(|v| v.to_string())),
        ("k", h.k.map(|v| v.to_string())),
        ("m", h.m.map(|v| v.to_string())),
        ("b", h.b.map(|v| v.to_string())),
        ("negatives", h.negatives.map(|v| v.to_string())),
        ("alpha", h.alpha.map(|v| v.to_string())),
        ("gamma", h.gamma.map(|v| v.to_string())),
        ("lr", h.lr.map(|v| v.to_string())),
        ("lambda", h.lambda.map(|v| v.to_string())),
        ("max-steps", h.max_steps.map(|v| v.to_string())),
        ("valid-every", h.valid_every.map(|v| v.to_string())),
        ("halve-after", h.halve_after.map(|v| v.to_string())),
        ("seed", h.seed.map(|v| v.to_string())),
        ("threads", h.threads.map(|v| v.to_string())),
    ];
    let variant_given = h.variant.is_some() || values.contains_key("variant") && h.config.is_some();
    for (k, v) in flags {
        if let Some(v) = v {
            values.insert(k.to_string(), v);
        }
    }
    let variant: Variant = parse_value(&values, "variant")?;
    let model = ModelSpec {
        variant,
        d: parse_value(&values, "d")?,
        k: parse_value(&values, "k")?,
        m: if variant.uses_projection() { parse_value(&values, "m")? } else { 0 },
        seed: parse_value(&values, "seed")?,
    };
    if model.d < 1 {
        return Err(CliError::InvalidValue("d must be >= 1".into()));
    }
    if model.k < 2 {
        return Err(CliError::InvalidValue("k must be >= 2".into()));
    }
    let train = TrainConfig {
        b: parse_value(&values, "b")?,
        l: parse_value(&values, "negatives")?,
        alpha: parse_value(&values, "alpha")?,
        gamma: parse_value(&values, "gamma")?,
        lr: parse_value(&values, "lr")?,
        lambda: parse_value(&values, "lambda")?,
        max_steps: parse_value(&values, "max-steps")?,
        valid_every: parse_value(&values, "valid-every")?,
        halve_after: parse_value(&values, "halve-after")?,
        seed: model.seed,
        ..TrainConfig::default()
    };
    train.validate().map_err(|e| CliError::InvalidValue(e.to_string()))?;
    let threads = if values.contains_key("threads") { Some(parse_value(&values, "threads")?) } else { None };
    Ok((model, train, threads, variant_given))
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn check_threads(t: Option<usize>) -> Result<usize, CliError> {
    match t {
        Some(0) => Err(CliError::InvalidValue("threads must be >= 1".into())),
        Some(n) => Ok(n),
        None => Ok(default_threads()),
    }
}

/// Parses a full argument vector (program name first).
pub fn parse_args<I, T>(argv: I) -> Result<RunSpec, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            CliError::Help(e.to_string())
        }
        ErrorKind::InvalidValue | ErrorKind::ValueValidation => CliError::InvalidValue(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    })?;
    let blank = |command| -> Result<RunSpec, CliError> {
        let (model, train, _, _) = hyper_spec(&HyperArgs::default())?;
        Ok(RunSpec {
            command,
            data: None,
            model,
            variant_given: false,
            train,
            checkpoint: None,
            out: None,
            threads: default_threads(),
            split: Split::Test,
            prop_k: 8,
            prop_trials: 200,
            synth_entities: 50,
            synth_kind: SynthKind::Pattern,
        })
    };
    match cli.command {
        Command::Train(a) => {
            let data = a.hyper.data.clone().ok_or_else(|| CliError::MissingPath("train needs --data".into()))?;
            let (model, train, threads, variant_given) = hyper_spec(&a.hyper)?;
            Ok(RunSpec {
                data: Some(data),
                model,
                train,
                variant_given,
                checkpoint: a.checkpoint,
                out: a.out,
                threads: check_threads(threads)?,
                ..blank(CommandKind::Train)?
            })
        }
        Command::Eval(a) => {
            let checkpoint = a.checkpoint.ok_or_else(|| CliError::Usage("eval needs --checkpoint".into()))?;
            let data = a.data.ok_or_else(|| CliError::MissingPath("eval needs --data".into()))?;
            let mut spec = blank(CommandKind::Eval)?;
            if let Some(v) = a.variant {
                spec.model.variant = v;
                spec.variant_given = true;
            }
            Ok(RunSpec {
                data: Some(data),
                checkpoint: Some(checkpoint),
                split: a.split.into(),
                out: a.out,
                threads: check_threads(a.threads)?,
                ..spec
            })
        }
        Command::TestProps(a) => {
            if a.k < 2 {
                return Err(CliError::InvalidValue("k must be >= 2".into()));
            }
            Ok(RunSpec { prop_k: a.k, prop_trials: a.trials.max(1), model: ModelSpec { seed: a.seed, ..blank(CommandKind::TestProps)?.model }, ..blank(CommandKind::TestProps)? })
        }
        Command::GenSynth(a) => {
            let out = a.out.ok_or_else(|| CliError::MissingPath("gen-synth needs --out".into()))?;
            if a.kind == SynthKind::Pattern && a.entities < 10 {
                return Err(CliError::InvalidValue("the pattern graph needs at least 10 entities".into()));
            }
            let mut spec = blank(CommandKind::GenSynth)?;
            spec.model.seed = a.seed;
            Ok(RunSpec { out: Some(out), synth_entities: a.entities, synth_kind: a.kind, ..spec })
        }
    }
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::InvalidValue(format!("thread pool: {e}")))
}

fn load_data(path: &Path) -> Result<(Vocab, crate::data::TripleStore), CliError> {
    if !path.exists() {
        return Err(CliError::MissingPath(path.display().to_string()));
    }
    Ok(load_dataset(path)?)
}

fn create_file(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_reports(
    dir: &Path,
    prefix: &str,
    model: &HouseModel,
    vocab: &Vocab,
    store: &crate::data::TripleStore,
    split: Split,
) -> Result<MetricsReport, CliError> {
    let filter = build_filter_index(store);
    let triples = store.split(split);
    let ranks = rank_all(model, triples, &filter)?;
    let overall = MetricsReport::from_ranks(ranks.iter().map(|r| r.rank));
    let per_rel = per_relation_from_ranks(&ranks);
    let rmp = rmp_from_ranks(&ranks, &classify_rmp(store));

    let path = dir.join(format!("{prefix}metrics.tsv"));
    let mut f = create_file(&path)?;
    write_metrics_tsv(&mut f, "split", [(split.name().to_string(), &overall)]).map_err(io_err(&path))?;

    let path = dir.join(format!("{prefix}per_relation.tsv"));
    let mut f = create_file(&path)?;
    let rows = per_rel.iter().map(|(r, m)| (vocab.relations.name(*r).unwrap_or("?").to_string(), m));
    write_metrics_tsv(&mut f, "relation", rows).map_err(io_err(&path))?;

    let path = dir.join(format!("{prefix}rmp.tsv"));
    let mut f = create_file(&path)?;
    write_rmp_tsv(&mut f, &rmp).map_err(io_err(&path))?;
    Ok(overall)
}

fn run_train(spec: &RunSpec) -> Result<(), CliError> {
    let data = spec.data.as_deref().ok_or_else(|| CliError::MissingPath("--data".into()))?;
    let (vocab, store) = load_data(data)?;
    let digest = vocab.digest();
    let model = match &spec.checkpoint {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            ckpt.verify(Some(spec.model.variant), &digest, true)?;
            ckpt.model
        }
        None => init_parameters(&spec.model.config(store.num_entities, store.num_relations, spec.train.gamma)?)?,
    };
    let out = spec.out.clone().unwrap_or_else(|| PathBuf::from("housekge-run"));
    fs::create_dir_all(&out).map_err(io_err(&out))?;
    info!(
        "training {} d={} k={} m={} on {} ({} entities, {} relations, {} train triples)",
        spec.model.variant,
        model.config().d,
        model.config().k,
        model.config().m,
        data.display(),
        store.num_entities,
        store.num_relations,
        store.train.len()
    );
    let pool = thread_pool(spec.threads)?;
    let outcome = pool.install(|| {
        let filter = build_filter_index(&store);
        train(model, &store, &filter, &spec.train)
    })?;

    let log_path = out.join("train_log.tsv");
    let mut f = create_file(&log_path)?;
    write_log(&mut f, &outcome.log).map_err(io_err(&log_path))?;
    f.flush().map_err(io_err(&log_path))?;

    let ckpt_path = out.join("model.ckpt");
    save_checkpoint(&Checkpoint::new(outcome.model.clone(), digest), &ckpt_path)?;

    if let Some(v) = outcome.best_valid {
        println!("best valid (step {}): {v}", outcome.best_step);
    }
    if !store.test.is_empty() {
        let test = pool.install(|| write_reports(&out, "test_", &outcome.model, &vocab, &store, Split::Test))?;
        println!("test: {test}");
    }
    println!("checkpoint: {}", ckpt_path.display());
    Ok(())
}

fn run_eval(spec: &RunSpec) -> Result<(), CliError> {
    let data = spec.data.as_deref().ok_or_else(|| CliError::MissingPath("--data".into()))?;
    let ckpt_path = spec.checkpoint.as_deref().ok_or_else(|| CliError::Usage("eval needs --checkpoint".into()))?;
    let (vocab, store) = load_data(data)?;
    let ckpt = load_checkpoint(ckpt_path)?;
    ckpt.verify(spec.variant_given.then_some(spec.model.variant), &vocab.digest(), false)?;
    let cfg = ckpt.model.config();
    if store.num_entities > cfg.num_entities || store.num_relations > cfg.num_relations {
        return Err(CliError::Data(DataError::BadDictionary {
            path: data.to_path_buf(),
            line: 0,
            reason: format!(
                "dataset has {} entities / {} relations, checkpoint has {} / {}",
                store.num_entities, store.num_relations, cfg.num_entities, cfg.num_relations
            ),
        }));
    }
    if store.split(spec.split).is_empty() {
        warn!("split {} is empty", spec.split.name());
    }
    let out = spec.out.clone().unwrap_or_else(|| std::env::temp_dir().join("housekge-eval"));
    fs::create_dir_all(&out).map_err(io_err(&out))?;
    let pool = thread_pool(spec.threads)?;
    let prefix = format!("{}_", spec.split.name());
    let report = pool.install(|| write_reports(&out, &prefix, &ckpt.model, &vocab, &store, spec.split))?;
    println!("{}: {report}", spec.split.name());
    Ok(())
}

fn run_props(spec: &RunSpec) -> Result<(), CliError> {
    let outcomes = run_property_suite(spec.prop_k, spec.prop_trials, spec.model.seed);
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed()).count();
    if failed > 0 {
        return Err(CliError::PropertyFailure { failed, total: outcomes.len() });
    }
    Ok(())
}

fn run_synth(spec: &RunSpec) -> Result<(), CliError> {
    let out = spec.out.as_deref().ok_or_else(|| CliError::MissingPath("--out".into()))?;
    let (vocab, store) = match spec.synth_kind {
        SynthKind::Pattern => {
            let (v, s, _) = generate_pattern_kg(spec.synth_entities, &PatternMix::default(), spec.model.seed);
            (v, s)
        }
        SynthKind::ManyToOne => {
            let (v, s, _) = generate_many_to_one_kg(&ManyToOneMix::default(), spec.model.seed);
            (v, s)
        }
    };
    write_dataset(out, &vocab, &store)?;
    let s = store.stats();
    println!(
        "wrote {}: {} entities, {} relations, {}/{}/{} triples",
        out.display(),
        s.entities,
        s.relations,
        s.train,
        s.valid,
        s.test
    );
    Ok(())
}

/// Executes a parsed command and returns the process exit code.
pub fn run(spec: &RunSpec) -> i32 {
    let result = match spec.command {
        CommandKind::Train => run_train(spec),
        CommandKind::Eval => run_eval(spec),
        CommandKind::TestProps => run_props(spec),
        CommandKind::GenSynth => run_synth(spec),
    };
    match result {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// `parse_args` followed by `run`, reporting parse errors on stderr.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match parse_args(argv) {
        Ok(spec) => run(&spec),
        Err(CliError::Help(text)) => {
            print!("{text}");
            exit::OK
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
