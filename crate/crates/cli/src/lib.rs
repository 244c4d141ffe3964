//! `recfair` command-line pipeline.
//!
//! Each subcommand is one batch stage that reads and writes files in the
//! formats owned by the core modules: ingest → cluster → link → train →
//! recommend → analyze → rerank → eval → report, plus `synth` for seeded
//! test data.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use recfair_core::interactions::Mode;
use recfair_core::recommend::Algorithm;
use recfair_core::rerank::Strategy;
use recfair_core::{Error, Result};

pub mod commands;
pub mod config;
pub mod mock;
pub mod output;
pub mod report;

use config::parse_scale;

#[derive(Debug, Parser)]
#[command(name = "recfair", version, about = "Author-gender fairness audit pipeline for book recommenders")]
pub struct Cli {
    /// Pipeline configuration (JSON); flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and normalize catalog and authority records.
    Ingest(IngestArgs),
    /// Group ISBNs into works and map raw interactions onto them.
    Cluster(ClusterArgs),
    /// Resolve each work's author gender.
    Link(LinkArgs),
    /// Train recommendation models.
    Train(TrainArgs),
    /// Produce top-N lists for a sample of users.
    Recommend(RecommendArgs),
    /// Fit the profile and propagation model.
    Analyze(AnalyzeArgs),
    /// Apply a forced-balance re-ranker to recommendation lists.
    Rerank(RerankArgs),
    /// Leave-one-out accuracy evaluation with re-ranking variants.
    Eval(EvalArgs),
    /// Generate seeded synthetic data.
    Synth(SynthArgs),
    /// Summary tables from analysis, recommendation, and evaluation outputs.
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Cluster(_) => "cluster",
            Command::Link(_) => "link",
            Command::Train(_) => "train",
            Command::Recommend(_) => "recommend",
            Command::Analyze(_) => "analyze",
            Command::Rerank(_) => "rerank",
            Command::Eval(_) => "eval",
            Command::Synth(_) => "synth",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long)]
    pub authorities: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModeArgs {
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Rating scale as `lo:hi`.
    #[arg(long, value_parser = parse_scale)]
    pub scale: Option<(f64, f64)>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Normalized catalog from `ingest` (default `<out-dir>/catalog.jsonl`).
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Raw interactions whose item column holds ISBN text or item ids.
    #[arg(long)]
    pub interactions: Option<PathBuf>,
    #[command(flatten)]
    pub mode: ModeArgs,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LinkArgs {
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub authorities: Option<PathBuf>,
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct Hyper {
    #[arg(long)]
    pub neighbors: Option<usize>,
    #[arg(long)]
    pub min_neighbors: Option<usize>,
    #[arg(long)]
    pub factors: Option<usize>,
    #[arg(long)]
    pub regularization: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub confidence_weight: Option<f64>,
    #[arg(long)]
    pub damping: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Cleaned interactions (default `<out-dir>/interactions.csv`).
    #[arg(long)]
    pub interactions: Option<PathBuf>,
    #[command(flatten)]
    pub mode: ModeArgs,
    /// Algorithms to train; defaults to those in the config.
    #[arg(long, value_delimiter = ',')]
    pub algorithm: Vec<Algorithm>,
    #[command(flatten)]
    pub hyper: Hyper,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MockKind {
    /// Popularity lists with each user's own profile proportion of female authors.
    ProfileCopy,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    /// Trained models; lists from all of them go into one file.
    #[arg(long)]
    pub model: Vec<PathBuf>,
    /// Add lists from a built-in mock recommender.
    #[arg(long)]
    pub mock: Option<MockKind>,
    #[arg(long)]
    pub interactions: Option<PathBuf>,
    #[command(flatten)]
    pub mode: ModeArgs,
    #[arg(long)]
    pub genders: Option<PathBuf>,
    /// Number of users to sample.
    #[arg(long)]
    pub sample: Option<usize>,
    /// Minimum known-gender profile items for sampled users.
    #[arg(long)]
    pub min_known: Option<u64>,
    /// List length.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub interactions: Option<PathBuf>,
    #[command(flatten)]
    pub mode: ModeArgs,
    #[arg(long)]
    pub genders: Option<PathBuf>,
    /// Recommendation files; re-ranked files are labelled `algorithm/strategy`.
    #[arg(long)]
    pub recs: Vec<PathBuf>,
    /// Precomputed profile counts (`user,n,y`), instead of interactions.
    #[arg(long, requires = "rec_obs", conflicts_with_all = ["interactions", "recs"])]
    pub profiles: Option<PathBuf>,
    /// Precomputed list observations (`user,algorithm,n,y,theta`).
    #[arg(long, requires = "profiles")]
    pub rec_obs: Option<PathBuf>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write per-user θ draws to posterior.csv.
    #[arg(long)]
    pub with_theta: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Fixed(f64),
    Profile,
}

fn parse_target(s: &str) -> std::result::Result<Target, String> {
    if s == "profile" {
        return Ok(Target::Profile);
    }
    s.parse().map(Target::Fixed).map_err(|_| format!("expected a number or `profile`, got {s:?}"))
}

#[derive(Debug, Args)]
pub struct RerankArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub strategy: Strategy,
    /// Target female proportion for greedy-reflect: a number or `profile`.
    #[arg(long, value_parser = parse_target)]
    pub target: Option<Target>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub genders: Option<PathBuf>,
    /// Needed for `--target profile`.
    #[arg(long)]
    pub interactions: Option<PathBuf>,
    #[command(flatten)]
    pub mode: ModeArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub interactions: Option<PathBuf>,
    #[command(flatten)]
    pub mode: ModeArgs,
    /// Item genders; enables the re-ranking variants.
    #[arg(long)]
    pub genders: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub algorithm: Vec<Algorithm>,
    #[command(flatten)]
    pub hyper: Hyper,
    /// Held-out interactions per user; only 1 is supported.
    #[arg(long, default_value_t = 1)]
    pub holdout: usize,
    #[arg(long)]
    pub list_len: Option<usize>,
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long)]
    pub min_ratings: Option<usize>,
    #[arg(long)]
    pub rerank_pool: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub strategies: Option<Vec<Strategy>>,
    /// Users for random hyperparameter search (disjoint from evaluation).
    #[arg(long)]
    pub tune_sample: Option<usize>,
    #[arg(long)]
    pub search_budget: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Profile counts with hidden tendencies (`profiles.csv`).
    Profiles,
    /// List observations for the spec's algorithms (`rec-obs.csv`).
    Recs,
    /// Items, genders, and interactions matching the profiles.
    Library,
    /// Low-rank rating matrix.
    Matrix,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub kind: SynthKind,
    /// Generator spec (JSON); defaults apply when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `summary.json` from `analyze`.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long)]
    pub recs: Vec<PathBuf>,
    #[arg(long)]
    pub genders: Option<PathBuf>,
    /// Reports from `eval`.
    #[arg(long)]
    pub eval: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("RECFAIR_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidInput(format!("RECFAIR_THREADS must be a positive integer, got {raw:?}")))?;
    // A second call in the same process (tests) finds the pool built already.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parse arguments, run the subcommand, and return the process exit status.
///
/// Usage errors print clap's message and usage and return 2. Failures print
/// a one-line JSON error record to stderr and return 1.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let name = cli.command.name();
    match init_threads().and_then(|_| commands::execute(&cli)) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            let record = serde_json::json!({
                "error": {"command": name, "kind": e.kind(), "message": e.to_string()}
            });
            eprintln!("{record}");
            1
        }
    }
}
