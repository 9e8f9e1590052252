mod config;
mod stages;
mod summary;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Config;

/// Similarity-controlled counterfactual datasets for visual grounding.
#[derive(Parser, Debug)]
#[command(name = "cfground", version, about)]
struct Cli {
    /// TOML file with defaults; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cosine-similarity distribution of random caption pairs.
    Anisotropy(AnisotropyArgs),
    /// Quantile bin edges from a similarity distribution.
    Edges(EdgesArgs),
    /// Counterfactual manifest for one strategy.
    Generate(GenerateArgs),
    /// Approximation scores and correlations for one manifest.
    Evaluate(EvaluateArgs),
    /// Tables and charts from manifests and evaluation results.
    Report(ReportArgs),
    /// Embedding cache maintenance.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Args, Debug)]
pub struct ProviderArgs {
    /// synthetic:SEED[:DIM[:BIAS]], fixture:PATH, remote:HOST:PORT or remote:stdio
    #[arg(long)]
    pub provider: Option<String>,
    /// Embedding cache file, read if present and rewritten after the run.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnisotropyArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[command(flatten)]
    pub provider: ProviderArgs,
    /// Number of random pairs [default: 50000]
    #[arg(long)]
    pub pairs: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EdgesArgs {
    #[arg(long)]
    pub dist: Option<PathBuf>,
    /// Number of bins [default: 5]
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// object-word, object-sentence or context
    #[arg(long)]
    pub strategy: Option<String>,
    /// Number of bins; must match the edges file [default: 5]
    #[arg(long)]
    pub k: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub parses: Option<PathBuf>,
    /// Category synonyms JSON.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[command(flatten)]
    pub provider: ProviderArgs,
    /// uniform or nearest-center [default: uniform]
    #[arg(long)]
    pub selection: Option<String>,
    /// Worker threads, 0 for all cores. Output does not depend on it [default: 0]
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Directory for objects.jsonl and contexts.jsonl audit dumps.
    #[arg(long)]
    pub dump_vocab: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Minimum original-caption IoU [default: 0.5]
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Generated manifests (repeatable).
    #[arg(long = "manifest")]
    pub manifests: Vec<PathBuf>,
    /// Evaluation output directories (repeatable).
    #[arg(long = "results")]
    pub results: Vec<PathBuf>,
    /// Similarity distribution from `anisotropy`.
    #[arg(long)]
    pub dist: Option<PathBuf>,
    /// Bin edges; defaults to those of the first manifest.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum CacheAction {
    /// Embed every caption (and optionally vocabulary terms) into a cache.
    Build {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Also embed the object vocabulary from this synonyms file.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[command(flatten)]
        provider: ProviderArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print dimension, entry count and size of a cache file.
    Inspect {
        #[arg(long)]
        path: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    config.check_keys(stages::CONFIG_KEYS)?;
    match cli.command {
        Command::Anisotropy(a) => stages::anisotropy(&config, a),
        Command::Edges(a) => stages::edges(&config, a),
        Command::Generate(a) => stages::generate(&config, a),
        Command::Evaluate(a) => stages::evaluate(&config, a),
        Command::Report(a) => stages::report(&config, a),
        Command::Cache { action } => stages::cache(&config, action),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
