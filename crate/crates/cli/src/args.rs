use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use semtag_core::corpus::SplitName;
use semtag_core::encoders::EncoderKind;
use semtag_core::features::{CategoricalMode, Source};

#[derive(Debug, Parser)]
#[command(
    name = "semtag",
    version,
    about = "Train, evaluate and apply sentence-level semantic classifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw train/dev/test id lists from a labelled corpus.
    Split(SplitArgs),
    /// Draw negative sentences per work, excluding known positives.
    SampleNegatives(SampleNegativesArgs),
    /// Word and example shares per period of birth, as CSV.
    Stats(StatsArgs),
    /// Train one model and write its checkpoint and report.
    Train(TrainArgs),
    /// Score a labelled corpus with a checkpoint.
    Eval(EvalArgs),
    /// Train over consecutive seeds in parallel and aggregate.
    Multiseed(MultiseedArgs),
    /// Lemma-lexicon baselines.
    Baseline(BaselineArgs),
    /// Tag sentences with a checkpoint, most probable first.
    Tag(TagArgs),
    /// Attention ranks, punctuation attention and disguise runs.
    Diagnose(DiagnoseArgs),
    /// Serve the review API.
    Serve(ServeArgs),
    /// Write the sentences accepted in review as a corpus fragment.
    Export(ExportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SplitChoice {
    Full,
    Partial,
}

impl From<SplitChoice> for SplitName {
    fn from(c: SplitChoice) -> Self {
        match c {
            SplitChoice::Full => SplitName::Full,
            SplitChoice::Partial => SplitName::Partial,
        }
    }
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value = "full")]
    pub name: SplitChoice,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Scale every split target by this factor (for smaller corpora).
    #[arg(long, default_value_t = 1.0)]
    pub ratio: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleNegativesArgs {
    /// Unlabelled sentences; grouped into works by `work_id`.
    #[arg(long)]
    pub works: PathBuf,
    /// Known positives; sentences with identical tokens are never drawn.
    #[arg(long)]
    pub positives: PathBuf,
    /// Sentences drawn per work.
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub bucket_years: u32,
    /// CSV output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Flags that override the config file.
#[derive(Clone, Debug, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_kind)]
    pub encoder: Option<EncoderKind>,
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Comma-separated, e.g. `lemma-word,lemma-char`.
    #[arg(long, value_delimiter = ',', value_parser = parse_source)]
    pub sources: Option<Vec<Source>>,
    #[arg(long, value_parser = parse_mode)]
    pub categorical_mode: Option<CategoricalMode>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
}

fn parse_enum<T: serde::de::DeserializeOwned>(raw: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(raw.to_string())).map_err(|_| format!("unknown value {raw:?}"))
}

fn parse_kind(raw: &str) -> Result<EncoderKind, String> {
    parse_enum(raw)
}

fn parse_source(raw: &str) -> Result<Source, String> {
    parse_enum(raw)
}

fn parse_mode(raw: &str) -> Result<CategoricalMode, String> {
    parse_enum(raw)
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Output directory for `model.ckpt`, `report.json` and the manifest.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Precomputed contextual vectors, for models that use them.
    #[arg(long)]
    pub external: Option<PathBuf>,
    /// Metrics JSON; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MultiseedArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Also write one checkpoint per seed.
    #[arg(long)]
    pub keep_models: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// CSV with header `lemma,stopword,multiword_only,figurative`.
    #[arg(long)]
    pub inventory: PathBuf,
    /// Extra stopwords, one lemma per line.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// 1 to 4; all four when absent.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub variant: Option<u8>,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TagArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub external: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Tagged predictions with attention weights, for rank and punctuation
    /// tables.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub buckets: usize,
    /// Punctuation marks, one character each.
    #[arg(long, default_value = ".!?;:,")]
    pub marks: String,
    /// `NAME=checkpoint`, repeatable, for the disguise matrix.
    #[arg(long = "disguise-model", value_parser = parse_named)]
    pub disguise_models: Vec<(String, PathBuf)>,
    /// JSON list of `{"name": ..., "metadata": {...}}`.
    #[arg(long)]
    pub personas: Option<PathBuf>,
    #[arg(long)]
    pub external: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_named(raw: &str) -> Result<(String, PathBuf), String> {
    match raw.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(format!("expected NAME=PATH, got {raw:?}")),
    }
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Existing training corpus; accepted sentences whose id already occurs
    /// there are left out.
    #[arg(long)]
    pub exclude: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}
