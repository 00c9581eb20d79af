//! `mindscreen` command line: generate, train, evaluate, assess, serve.

pub mod commands;
pub mod settings;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mindscreen_core::ClassifierKind;
use thiserror::Error;

use settings::FlagValues;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("file: {0}")]
    File(String),
    #[error("invalid answers:\n{0}")]
    Answers(String),
    #[error(transparent)]
    Core(#[from] mindscreen_core::Error),
    #[error(transparent)]
    Service(#[from] mindscreen_service::ServiceError),
}

impl CliError {
    /// 2 for usage errors, like clap's own; 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            _ => 1,
        }
    }
}

const PRECEDENCE: &str = "Settings are read from built-in defaults, then the --config file \
(TOML, or JSON for *.json), then flags, then MINDSCREEN_* environment variables; later sources win. \
Variables: MINDSCREEN_SEED, MINDSCREEN_K, MINDSCREEN_C, MINDSCREEN_TOL, MINDSCREEN_FOLDS, \
MINDSCREEN_TEST_FRACTION, MINDSCREEN_HOST, MINDSCREEN_PORT, MINDSCREEN_MODEL, MINDSCREEN_LOG.";

#[derive(Debug, Parser)]
#[command(name = "mindscreen", version, about = "Behavioral-disorder screening toolkit", after_help = PRECEDENCE)]
pub struct Cli {
    /// TOML or JSON settings file
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic labeled cohort as CSV
    Generate(GenerateArgs),
    /// Fit a preprocessor and classifier on the training split and save the model
    Train(TrainArgs),
    /// Holdout and k-fold reports in the precision/recall/F1 table layout
    Evaluate(EvaluateArgs),
    /// Classify one set of answers with a saved model
    Assess(AssessArgs),
    /// Run the HTTP screening service
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// RNG seed for generation, splits and folds [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Neighbors for knn [default: 3]
    #[arg(long)]
    pub k: Option<usize>,
    /// SVM penalty [default: 1.0]
    #[arg(long = "c", value_name = "C")]
    pub c: Option<f64>,
    /// SVM stopping tolerance [default: 0.001]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Fraction held out for testing [default: 0.2]
    #[arg(long)]
    pub test_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Number of records (at least 30) [default: 1000]
    #[arg(long)]
    pub n: Option<usize>,
    /// 0 gives identical class distributions, 1 the strongest shifts [default: 0.5]
    #[arg(long)]
    pub separability: Option<f64>,
    /// Output CSV; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub kind: ClassifierArg,
    /// Labeled CSV
    #[arg(long)]
    pub data: PathBuf,
    /// Model file to write
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassifierArg {
    Knn,
    Svm,
}

impl From<ClassifierArg> for ClassifierKind {
    fn from(a: ClassifierArg) -> Self {
        match a {
            ClassifierArg::Knn => ClassifierKind::Knn,
            ClassifierArg::Svm => ClassifierKind::Svm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalKind {
    Knn,
    Svm,
    Both,
}

impl EvalKind {
    pub fn kinds(self) -> Vec<ClassifierKind> {
        match self {
            Self::Knn => vec![ClassifierKind::Knn],
            Self::Svm => vec![ClassifierKind::Svm],
            Self::Both => ClassifierKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    /// Train/test split only
    Holdout,
    /// k-fold cross-validation only
    Cv,
    Both,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_enum, default_value = "both")]
    pub kind: EvalKind,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub mode: EvalMode,
    /// Number of folds, at least 2 [default: 10]
    #[arg(long)]
    pub folds: Option<usize>,
    /// Keep class proportions in every fold
    #[arg(long)]
    pub stratified: bool,
    /// Also write the full-precision report as JSON
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct AssessArgs {
    /// Model file written by `train`
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// JSON object of feature name to answer
    #[arg(long, value_name = "FILE")]
    pub answers: Option<PathBuf>,
    /// One answer as name=value; repeatable, overrides the file
    #[arg(long = "answer", value_name = "NAME=VALUE")]
    pub answer: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    /// Assessment log (JSON lines)
    #[arg(long)]
    pub log: Option<PathBuf>,
}

impl Command {
    pub fn flag_values(&self) -> FlagValues {
        let (common, model) = match self {
            Command::Generate(a) => (Some(&a.common), None),
            Command::Train(a) => (Some(&a.common), Some(&a.model)),
            Command::Evaluate(a) => (Some(&a.common), Some(&a.model)),
            Command::Assess(_) | Command::Serve(_) => (None, None),
        };
        let model = model.cloned().unwrap_or_default();
        let (folds, stratified) = match self {
            Command::Evaluate(a) => (a.folds, a.stratified),
            _ => (None, false),
        };
        let (host, port, model_path, log) = match self {
            Command::Serve(a) => (a.host.clone(), a.port, a.model.clone(), a.log.clone()),
            Command::Assess(a) => (None, None, a.model.clone(), None),
            _ => (None, None, None, None),
        };
        FlagValues {
            seed: common.and_then(|c| c.seed),
            k: model.k,
            c: model.c,
            tol: model.tol,
            folds,
            test_fraction: model.test_fraction,
            stratified,
            host,
            port,
            model: model_path,
            log,
        }
    }
}
