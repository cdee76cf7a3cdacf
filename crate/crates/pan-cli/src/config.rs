//! Run configuration: one optional TOML file plus per-command flag
//! overrides. Precedence is defaults < config file < command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pan_core::data::SynthConfig;
use pan_core::encoder::EncoderKind;
use pan_core::model::Dims;
use pan_core::pipeline::{OptimizerKind, TrainConfig};
use pan_core::Mode;
use serde::Deserialize;

use crate::CliError;

// ------------------------------------------------------------ command line

/// Path-attention entity typing: train, evaluate, and probe models over a
/// type hierarchy.
#[derive(Debug, Parser)]
#[command(name = "pan", version)]
pub struct Cli {
    /// TOML configuration file; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a JSON-lines corpus and save it.
    Train(TrainArgs),
    /// Score a saved model on a test corpus.
    Eval(EvalArgs),
    /// Write per-mention predicted types for a test corpus.
    Predict(PredictArgs),
    /// Generate a synthetic distant-supervision corpus.
    Synth(SynthArgs),
    /// Compare analytic gradients against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Train every (mode, seed) pair on matched corpora and tabulate metrics.
    Experiment(ExperimentArgs),
}

/// Training knobs shared by `train` and `experiment`.
#[derive(Debug, Default, Args)]
pub struct TrainFlags {
    /// Attention mode: PAN-A, PAN-M, AN, or uniform.
    #[arg(long)]
    pub mode: Option<String>,
    /// Sentence encoder: lstm or mean-pool.
    #[arg(long)]
    pub encoder: Option<String>,
    /// Word embedding width.
    #[arg(long)]
    pub d_w: Option<usize>,
    /// LSTM hidden width per direction.
    #[arg(long)]
    pub d_h: Option<usize>,
    /// Sentence and type representation width.
    #[arg(long)]
    pub d: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Seed for initialization and shuffling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optimizer: adam or sgd.
    #[arg(long)]
    pub optimizer: Option<String>,
}

/// Corpus-generator knobs shared by `synth` and `experiment`.
#[derive(Debug, Default, Args)]
pub struct SynthFlags {
    /// Number of depth-1 types.
    #[arg(long)]
    pub roots: Option<usize>,
    /// Children per non-leaf type.
    #[arg(long)]
    pub branching: Option<usize>,
    /// Layers in the hierarchy.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Training entities (one bag each).
    #[arg(long)]
    pub train_entities: Option<usize>,
    /// Test mentions come from this many held-out entities.
    #[arg(long)]
    pub test_entities: Option<usize>,
    /// Minimum sentences per training entity.
    #[arg(long)]
    pub sentences_min: Option<usize>,
    /// Maximum sentences per training entity.
    #[arg(long)]
    pub sentences_max: Option<usize>,
    /// Tokens per sentence, mention included.
    #[arg(long)]
    pub sentence_len: Option<usize>,
    /// Distinct signal tokens per type.
    #[arg(long)]
    pub signal_tokens: Option<usize>,
    /// Distinct filler tokens shared by all sentences.
    #[arg(long)]
    pub filler_tokens: Option<usize>,
    /// Probability an entity's label set gains one unsupported type.
    #[arg(long)]
    pub noise_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Type hierarchy file, one full path per line.
    #[arg(long, value_name = "FILE")]
    pub hierarchy: Option<PathBuf>,
    /// Training corpus, JSON-lines.
    #[arg(long, value_name = "FILE")]
    pub train_corpus: Option<PathBuf>,
    /// Where to write the trained model.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Optional CSV loss-trace output.
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Type hierarchy file, one full path per line.
    #[arg(long, value_name = "FILE")]
    pub hierarchy: Option<PathBuf>,
    /// Test corpus, JSON-lines.
    #[arg(long, value_name = "FILE")]
    pub test_corpus: Option<PathBuf>,
    /// Trained model file.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Optional JSON report output; metrics always print to stdout.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Type hierarchy file, one full path per line.
    #[arg(long, value_name = "FILE")]
    pub hierarchy: Option<PathBuf>,
    /// Corpus of mentions to score, JSON-lines.
    #[arg(long, value_name = "FILE")]
    pub test_corpus: Option<PathBuf>,
    /// Trained model file.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Where to write the JSON-lines predictions.
    #[arg(long, value_name = "FILE")]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory for hierarchy.txt, train.jsonl, and test.jsonl.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Seed for the corpus generator.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub synth: SynthFlags,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Optional hierarchy file; default is a built-in three-layer tree.
    #[arg(long, value_name = "FILE")]
    pub hierarchy: Option<PathBuf>,
    /// Attention mode: PAN-A, PAN-M, AN, or uniform.
    #[arg(long)]
    pub mode: Option<String>,
    /// Sentence encoder: lstm or mean-pool.
    #[arg(long)]
    pub encoder: Option<String>,
    /// Word embedding width.
    #[arg(long)]
    pub d_w: Option<usize>,
    /// LSTM hidden width per direction.
    #[arg(long)]
    pub d_h: Option<usize>,
    /// Sentence and type representation width.
    #[arg(long)]
    pub d: Option<usize>,
    /// Seed for the parameters and the probe bag.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sentences in the probe bag.
    #[arg(long)]
    pub sentences: Option<usize>,
    /// Finite-difference step.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Relative-error tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Optional JSON output for per-run rows and per-mode summaries.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Attention modes to compare, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub modes: Option<Vec<String>>,
    /// Seeds, one matched run per seed per mode, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[command(flatten)]
    pub train: TrainFlags,
    #[command(flatten)]
    pub synth: SynthFlags,
}

// ------------------------------------------------------------- config file

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub gradcheck: GradcheckSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub hierarchy: Option<PathBuf>,
    pub train_corpus: Option<PathBuf>,
    pub test_corpus: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub mode: Option<String>,
    pub encoder: Option<String>,
    pub d_w: Option<usize>,
    pub d_h: Option<usize>,
    pub d: Option<usize>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub optimizer: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub roots: Option<usize>,
    pub branching: Option<usize>,
    pub depth: Option<usize>,
    pub train_entities: Option<usize>,
    pub test_entities: Option<usize>,
    pub sentences_min: Option<usize>,
    pub sentences_max: Option<usize>,
    pub sentence_len: Option<usize>,
    pub signal_tokens: Option<usize>,
    pub filler_tokens: Option<usize>,
    pub noise_rate: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub modes: Option<Vec<String>>,
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckSection {
    pub eps: Option<f64>,
    pub tol: Option<f64>,
    pub sentences: Option<usize>,
}

pub fn load_file(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Usage(format!("config file not found: {}", path.display()))
        } else {
            CliError::Usage(format!("cannot read config file {}: {e}", path.display()))
        }
    })?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

// --------------------------------------------------------------- resolvers

fn parse_mode(s: &str) -> Result<Mode, CliError> {
    Mode::parse(s).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown attention mode {s:?} (expected PAN-A, PAN-M, AN, or uniform)"
        ))
    })
}

fn parse_encoder(s: &str) -> Result<EncoderKind, CliError> {
    EncoderKind::parse(s).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown encoder {s:?} (expected lstm or mean-pool)"
        ))
    })
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind, CliError> {
    OptimizerKind::parse(s).ok_or_else(|| {
        CliError::Usage(format!("unknown optimizer {s:?} (expected adam or sgd)"))
    })
}

/// A path the command cannot run without: flag wins, then the config file.
fn require_path(
    flag: Option<&PathBuf>,
    file: Option<&PathBuf>,
    flag_name: &str,
    file_key: &str,
) -> Result<PathBuf, CliError> {
    flag.or(file).cloned().ok_or_else(|| {
        CliError::Usage(format!(
            "missing required path: pass --{flag_name} or set {file_key} in the config file"
        ))
    })
}

fn train_config(file: &TrainSection, flags: &TrainFlags) -> Result<TrainConfig, CliError> {
    let default = TrainConfig::default();
    let mode = match flags.mode.as_deref().or(file.mode.as_deref()) {
        Some(s) => parse_mode(s)?,
        None => default.mode,
    };
    let encoder = match flags.encoder.as_deref().or(file.encoder.as_deref()) {
        Some(s) => parse_encoder(s)?,
        None => default.encoder,
    };
    let optimizer = match flags.optimizer.as_deref().or(file.optimizer.as_deref()) {
        Some(s) => parse_optimizer(s)?,
        None => default.optimizer,
    };
    Ok(TrainConfig {
        mode,
        encoder,
        dims: Dims {
            d_w: flags.d_w.or(file.d_w).unwrap_or(default.dims.d_w),
            d_h: flags.d_h.or(file.d_h).unwrap_or(default.dims.d_h),
            d: flags.d.or(file.d).unwrap_or(default.dims.d),
        },
        lr: flags.lr.or(file.lr).unwrap_or(default.lr),
        epochs: flags.epochs.or(file.epochs).unwrap_or(default.epochs),
        seed: flags.seed.or(file.seed).unwrap_or(default.seed),
        optimizer,
    })
}

fn synth_config(
    file: &SynthSection,
    flags: &SynthFlags,
    seed_flag: Option<u64>,
) -> SynthConfig {
    let d = SynthConfig::default();
    SynthConfig {
        roots: flags.roots.or(file.roots).unwrap_or(d.roots),
        branching: flags.branching.or(file.branching).unwrap_or(d.branching),
        depth: flags.depth.or(file.depth).unwrap_or(d.depth),
        train_entities: flags
            .train_entities
            .or(file.train_entities)
            .unwrap_or(d.train_entities),
        test_entities: flags
            .test_entities
            .or(file.test_entities)
            .unwrap_or(d.test_entities),
        sentences_min: flags
            .sentences_min
            .or(file.sentences_min)
            .unwrap_or(d.sentences_min),
        sentences_max: flags
            .sentences_max
            .or(file.sentences_max)
            .unwrap_or(d.sentences_max),
        sentence_len: flags
            .sentence_len
            .or(file.sentence_len)
            .unwrap_or(d.sentence_len),
        signal_tokens_per_type: flags
            .signal_tokens
            .or(file.signal_tokens)
            .unwrap_or(d.signal_tokens_per_type),
        filler_tokens: flags
            .filler_tokens
            .or(file.filler_tokens)
            .unwrap_or(d.filler_tokens),
        noise_rate: flags.noise_rate.or(file.noise_rate).unwrap_or(d.noise_rate),
        seed: seed_flag.or(file.seed).unwrap_or(d.seed),
    }
}

#[derive(Debug)]
pub struct TrainJob {
    pub hierarchy: PathBuf,
    pub train_corpus: PathBuf,
    pub model: PathBuf,
    pub trace: Option<PathBuf>,
    pub cfg: TrainConfig,
}

pub fn resolve_train(file: &FileConfig, args: &TrainArgs) -> Result<TrainJob, CliError> {
    Ok(TrainJob {
        hierarchy: require_path(
            args.hierarchy.as_ref(),
            file.paths.hierarchy.as_ref(),
            "hierarchy",
            "paths.hierarchy",
        )?,
        train_corpus: require_path(
            args.train_corpus.as_ref(),
            file.paths.train_corpus.as_ref(),
            "train-corpus",
            "paths.train_corpus",
        )?,
        model: require_path(
            args.model.as_ref(),
            file.paths.model.as_ref(),
            "model",
            "paths.model",
        )?,
        trace: args.trace.clone().or_else(|| file.paths.trace.clone()),
        cfg: train_config(&file.train, &args.train)?,
    })
}

#[derive(Debug)]
pub struct EvalJob {
    pub hierarchy: PathBuf,
    pub test_corpus: PathBuf,
    pub model: PathBuf,
    pub report: Option<PathBuf>,
}

pub fn resolve_eval(file: &FileConfig, args: &EvalArgs) -> Result<EvalJob, CliError> {
    Ok(EvalJob {
        hierarchy: require_path(
            args.hierarchy.as_ref(),
            file.paths.hierarchy.as_ref(),
            "hierarchy",
            "paths.hierarchy",
        )?,
        test_corpus: require_path(
            args.test_corpus.as_ref(),
            file.paths.test_corpus.as_ref(),
            "test-corpus",
            "paths.test_corpus",
        )?,
        model: require_path(
            args.model.as_ref(),
            file.paths.model.as_ref(),
            "model",
            "paths.model",
        )?,
        report: args.report.clone().or_else(|| file.paths.report.clone()),
    })
}

#[derive(Debug)]
pub struct PredictJob {
    pub hierarchy: PathBuf,
    pub test_corpus: PathBuf,
    pub model: PathBuf,
    pub predictions: PathBuf,
}

pub fn resolve_predict(file: &FileConfig, args: &PredictArgs) -> Result<PredictJob, CliError> {
    Ok(PredictJob {
        hierarchy: require_path(
            args.hierarchy.as_ref(),
            file.paths.hierarchy.as_ref(),
            "hierarchy",
            "paths.hierarchy",
        )?,
        test_corpus: require_path(
            args.test_corpus.as_ref(),
            file.paths.test_corpus.as_ref(),
            "test-corpus",
            "paths.test_corpus",
        )?,
        model: require_path(
            args.model.as_ref(),
            file.paths.model.as_ref(),
            "model",
            "paths.model",
        )?,
        predictions: require_path(
            args.predictions.as_ref(),
            file.paths.predictions.as_ref(),
            "predictions",
            "paths.predictions",
        )?,
    })
}

#[derive(Debug)]
pub struct SynthJob {
    pub out_dir: PathBuf,
    pub cfg: SynthConfig,
}

pub fn resolve_synth(file: &FileConfig, args: &SynthArgs) -> Result<SynthJob, CliError> {
    Ok(SynthJob {
        out_dir: args
            .out_dir
            .clone()
            .or_else(|| file.paths.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from(".")),
        cfg: synth_config(&file.synth, &args.synth, args.seed),
    })
}

#[derive(Debug)]
pub struct GradcheckJob {
    pub hierarchy: Option<PathBuf>,
    pub mode: Mode,
    pub encoder: EncoderKind,
    pub dims: Dims,
    pub seed: u64,
    pub sentences: usize,
    pub eps: f64,
    pub tol: f64,
}

pub fn resolve_gradcheck(
    file: &FileConfig,
    args: &GradcheckArgs,
) -> Result<GradcheckJob, CliError> {
    let mode = match args.mode.as_deref().or(file.train.mode.as_deref()) {
        Some(s) => parse_mode(s)?,
        None => Mode::PanA,
    };
    let encoder = match args.encoder.as_deref().or(file.train.encoder.as_deref()) {
        Some(s) => parse_encoder(s)?,
        None => EncoderKind::Lstm,
    };
    Ok(GradcheckJob {
        hierarchy: args
            .hierarchy
            .clone()
            .or_else(|| file.paths.hierarchy.clone()),
        mode,
        encoder,
        dims: Dims {
            d_w: args.d_w.or(file.train.d_w).unwrap_or(8),
            d_h: args.d_h.or(file.train.d_h).unwrap_or(8),
            d: args.d.or(file.train.d).unwrap_or(8),
        },
        seed: args.seed.or(file.train.seed).unwrap_or(0),
        sentences: args.sentences.or(file.gradcheck.sentences).unwrap_or(3),
        eps: args.eps.or(file.gradcheck.eps).unwrap_or(1e-5),
        tol: args.tol.or(file.gradcheck.tol).unwrap_or(1e-4),
    })
}

#[derive(Debug)]
pub struct ExperimentJob {
    pub report: Option<PathBuf>,
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub modes: Vec<Mode>,
    pub seeds: Vec<u64>,
}

pub fn resolve_experiment(
    file: &FileConfig,
    args: &ExperimentArgs,
) -> Result<ExperimentJob, CliError> {
    if args.train.mode.is_some() {
        return Err(CliError::Usage(
            "experiments compare modes; use --modes, not --mode".to_string(),
        ));
    }
    if args.train.seed.is_some() {
        return Err(CliError::Usage(
            "experiments run one seed per run; use --seeds, not --seed".to_string(),
        ));
    }
    let mode_names: Vec<String> = args
        .modes
        .clone()
        .or_else(|| file.experiment.modes.clone())
        .unwrap_or_else(|| vec!["PAN-A".into(), "AN".into(), "uniform".into()]);
    let mut modes = Vec::with_capacity(mode_names.len());
    for name in &mode_names {
        modes.push(parse_mode(name)?);
    }
    let seeds = args
        .seeds
        .clone()
        .or_else(|| file.experiment.seeds.clone())
        .unwrap_or_else(|| vec![0, 1, 2, 3, 4]);
    Ok(ExperimentJob {
        report: args.report.clone().or_else(|| file.paths.report.clone()),
        synth: synth_config(&file.synth, &args.synth, None),
        train: train_config(&file.train, &args.train)?,
        modes,
        seeds,
    })
}
