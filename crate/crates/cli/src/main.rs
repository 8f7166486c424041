//! `persuasion`: generate, ingest, train, evaluate and serve.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use persuasion_core::pipeline::AgentKind;
use persuasion_core::{ExpertStrategy, ModelKind};

mod commands;
mod context;

#[derive(Debug, Parser)]
#[command(name = "persuasion", version, about = "Repeated language-based persuasion games")]
pub struct Cli {
    /// Base seed for every random choice the command makes.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML run configuration; missing keys take defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Primary output path of the command.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Where to write the run manifest (default: `<out>.manifest.json`).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hotel/review corpora.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Play full interactions with an agent and write a dataset.
    Generate(GenerateArgs),
    /// Interaction datasets.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Score-distribution caches.
    #[command(subcommand)]
    Oracle(OracleCmd),
    /// Train a choice predictor.
    Train(TrainArgs),
    /// Per-round Go probabilities for a dataset.
    Predict(PredictArgs),
    /// Accuracy, calibration and winning-rate reports.
    Eval(EvalArgs),
    /// Experiment recipes.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Run the HTTP play service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArg {
    /// Corpus TSV.
    #[arg(long)]
    pub corpus: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArg {
    /// Precomputed score distributions; without it the stub oracle over the
    /// corpus scores is used with `oracle.spread` from the config.
    #[arg(long)]
    pub oracle_cache: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CorpusCmd {
    /// Check a corpus file and print its summary.
    Validate { path: PathBuf },
    /// Write a synthetic corpus.
    Synth {
        #[arg(long, default_value_t = 1068)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        high_fraction: f64,
    },
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub agent: AgentKind,
    #[arg(long)]
    pub players: usize,
    #[command(flatten)]
    pub corpus: CorpusArg,
    #[command(flatten)]
    pub oracle: OracleArg,
    /// Assign the eight personas round-robin by player index.
    #[arg(long)]
    pub personas: bool,
    /// Continue an interrupted run in `--out` from the next player index.
    #[arg(long)]
    pub resume: bool,
    /// Directory of recorded LLM replies (required for `--agent llm`).
    #[arg(long)]
    pub llm_cache: Option<PathBuf>,
    /// Serve only recorded replies; never contact the endpoint.
    #[arg(long)]
    pub replay_only: bool,
    /// Model name for replay-only runs (default: `LLM_MODEL`).
    #[arg(long)]
    pub llm_model: Option<String>,
    /// Minimum milliseconds between LLM requests across all workers.
    #[arg(long, default_value_t = 0)]
    pub min_interval_ms: u64,
}

#[derive(Debug, Subcommand)]
pub enum DatasetCmd {
    /// Validate a dataset and print its statistics.
    Stats { path: PathBuf },
    /// Concatenate two datasets with disjoint players.
    Mix { a: PathBuf, b: PathBuf },
    /// Random player-level train/test splits into the `--out` directory.
    Split {
        path: PathBuf,
        #[arg(long)]
        test_players: usize,
        #[arg(long, default_value_t = 1)]
        splits: usize,
    },
    /// Convert a raw human decision table (CSV) to a dataset.
    IngestHuman {
        path: PathBuf,
        /// TOML overrides for the column names and strategy ids.
        #[arg(long)]
        columns: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum OracleCmd {
    /// Compute the score distribution of every corpus review.
    Build {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long, default_value = "stub")]
        backend: OracleBackend,
        /// Use sampled answers instead of first-token log-probabilities.
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OracleBackend {
    Stub,
    Llm,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub corpus: CorpusArg,
    #[command(flatten)]
    pub oracle: OracleArg,
    #[arg(long, default_value = "lstm", value_parser = parse_model)]
    pub model: ModelKind,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub corpus: CorpusArg,
    #[command(flatten)]
    pub oracle: OracleArg,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Trained model; optional with `--winning-rates` alone.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[command(flatten)]
    pub oracle: OracleArg,
    /// Add per-expert and per-player-per-expert rows.
    #[arg(long)]
    pub per_expert: bool,
    /// Report the DM go rate per expert strategy.
    #[arg(long)]
    pub winning_rates: bool,
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCmd {
    /// Train on all experts and on one expert; test on that expert.
    GlobalVsLocal {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[command(flatten)]
        corpus: CorpusArg,
        #[command(flatten)]
        oracle: OracleArg,
        /// Target expert (default: each in turn).
        #[arg(long)]
        expert: Option<ExpertStrategy>,
        #[arg(long, default_value = "lstm", value_parser = parse_model)]
        model: ModelKind,
    },
    /// Accuracy as a function of the number of training players.
    Sweep {
        /// Comma-separated training sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Training pool as `name=path`; repeatable.
        #[arg(long = "source", required = true, value_parser = parse_source)]
        sources: Vec<(String, PathBuf)>,
        #[arg(long)]
        test: PathBuf,
        #[command(flatten)]
        corpus: CorpusArg,
        #[command(flatten)]
        oracle: OracleArg,
        #[arg(long, default_value = "lstm", value_parser = parse_model)]
        model: ModelKind,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub corpus: CorpusArg,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Completed sessions are appended here (created if missing).
    #[arg(long)]
    pub out_dataset: PathBuf,
    /// One action log per session.
    #[arg(long)]
    pub log_dir: Option<PathBuf>,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    match s {
        "lstm" => Ok(ModelKind::Lstm),
        "baseline" => Ok(ModelKind::Baseline),
        _ => Err(format!("unknown model `{s}` (expected lstm or baseline)")),
    }
}

fn parse_source(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or_else(|| format!("expected name=path, got `{s}`"))?;
    Ok((name.to_string(), PathBuf::from(path)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
