use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use twmd_core::Metric;

#[derive(Debug, Parser)]
#[command(name = "twmd", version, about = "Embedding-based sentence similarity and evaluation")]
pub struct Cli {
    /// Worker thread cap (defaults to all cores).
    #[arg(long, global = true, env = "TWMD_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Center (and optionally unit-normalize) the word vectors of an archive.
    Center(CenterArgs),
    /// Score every pair and write `pair_id<TAB>score` rows.
    Score(ScoreArgs),
    /// Correlate metric scores with human ratings.
    Correlate(ScoreArgs),
    /// Correlate over a temperature grid and pick the best temperature.
    Sweep(SweepArgs),
    /// Baseline/self/intra similarity per layer archive, plus trend checks.
    Contextuality(ContextualityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CenterMode {
    None,
    Dimension,
    Sentence,
    Corpus,
}

#[derive(Debug, Args, Serialize)]
pub struct CenterArgs {
    /// Input archive.
    #[arg(long)]
    pub input: PathBuf,

    #[arg(long, value_enum, default_value = "none")]
    pub center: CenterMode,

    /// Sentences per centering batch (corpus mode only; default: whole archive).
    #[arg(long)]
    pub batch_size: Option<usize>,

    /// Scale every word vector to unit length after centering.
    #[arg(long)]
    pub normalize: bool,

    /// Seed for the batch partition.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MetricArgs {
    /// sbert, cka, moverscore, bertscore_{recall,precision,f1}, twmd, trwmd,
    /// {twmd,trwmd}_precision or {twmd,trwmd}_f1.
    #[arg(long, value_parser = parse_metric)]
    pub metric: Metric,

    /// Temperature for tempered metrics (default depends on the metric and
    /// on whether the archive was batch-centered).
    #[arg(long)]
    pub temperature: Option<f64>,

    /// Sinkhorn iterations (twmd metrics only).
    #[arg(long, default_value_t = 1)]
    pub iters: usize,

    /// Report the raw C(X1, X2) instead of the normalized similarity.
    #[arg(long)]
    pub no_normalize: bool,

    /// Add the entropy term to the TWMD objective.
    #[arg(long)]
    pub include_entropy: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    /// Embedding archive (.emba).
    #[arg(long)]
    pub archive: PathBuf,

    /// Pairs TSV: pair_id, hyp_index, ref_index, human_score.
    #[arg(long)]
    pub pairs: PathBuf,

    #[command(flatten)]
    pub metric: MetricArgs,

    /// Output file; a `.manifest.json` is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// Archive of one dataset; repeat together with --pairs for pooling.
    #[arg(long, required = true)]
    pub archive: Vec<PathBuf>,

    /// Pairs of the dataset given by the --archive at the same position.
    #[arg(long, required = true)]
    pub pairs: Vec<PathBuf>,

    #[arg(long, value_parser = parse_metric)]
    pub metric: Metric,

    /// Comma-separated temperatures.
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<f64>,

    #[arg(long, default_value_t = 1)]
    pub iters: usize,

    #[arg(long)]
    pub no_normalize: bool,

    #[arg(long)]
    pub include_entropy: bool,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ContextualityArgs {
    /// One archive per layer.
    #[arg(long, required = true)]
    pub archive: Vec<PathBuf>,

    /// Draws per statistic.
    #[arg(long, default_value_t = twmd_core::analysis::DEFAULT_SAMPLES)]
    pub samples: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Largest allowed |baseline| similarity per layer.
    #[arg(long, default_value_t = 0.1)]
    pub baseline_threshold: f64,

    /// Tolerated step against the expected layer trend.
    #[arg(long, default_value_t = 0.02)]
    pub slack: f64,

    #[arg(long)]
    pub out: PathBuf,
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse::<Metric>().map_err(|e| e.to_string())
}
