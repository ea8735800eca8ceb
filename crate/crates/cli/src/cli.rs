//! Command-line surface. Every flag is optional here; required settings
//! and defaults are enforced by the resolver so the config file can
//! supply any of them.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "graspgrad",
    about = "Plan grasps by gradient ascent on a learned success classifier",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a labelled grasp dataset from simulated trials.
    GenData(GenDataArgs),
    /// Train a network and write a checkpoint plus a loss trace.
    Train(TrainArgs),
    /// Cross-validate a classifier architecture on a dataset.
    Eval(EvalArgs),
    /// Plan grasps for one scene and print each ascent run.
    Plan(PlanArgs),
    /// Compare planning methods over many scenes.
    Bench(BenchArgs),
    /// Export plot-ready TSV tables from logs.
    PlotData(PlotDataArgs),
}

#[derive(clap::Args)]
pub struct GenDataArgs {
    /// Number of grasp trials to simulate.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `all` or a comma-separated list of family ids.
    #[arg(long)]
    pub families: Option<String>,
    /// Output dataset path (required here or in the config file).
    #[arg(long)]
    pub out: Option<String>,
    /// Collector threads; the result is identical for any count.
    #[arg(long)]
    pub workers: Option<usize>,
    /// key=value config file consulted for unset flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct TrainArgs {
    /// Input dataset path.
    #[arg(long)]
    pub data: Option<String>,
    /// config-net, patch-net, or regression.
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub decay_every: Option<usize>,
    #[arg(long)]
    pub dropout_keep: Option<f64>,
    /// L2 penalty on weights (regression default 0.5, classifiers 0).
    #[arg(long)]
    pub ridge: Option<f64>,
    /// fixed or palm-tracked object patch.
    #[arg(long)]
    pub patch_mode: Option<String>,
    /// nearest or bilinear patch sampling.
    #[arg(long)]
    pub interp: Option<String>,
    /// Checkpoint output path.
    #[arg(long)]
    pub out: Option<String>,
    /// Loss-trace output path (defaults to `<out>.loss`).
    #[arg(long)]
    pub trace: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: Option<String>,
    /// Checkpoint whose architecture and hyperparameters are evaluated.
    #[arg(long)]
    pub model: Option<String>,
    /// seen (stratified folds) or unseen (family-disjoint folds).
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training iterations per fold.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub decay_every: Option<usize>,
    /// Optional TSV dump of per-fold, averaged and pooled ROC curves.
    #[arg(long)]
    pub roc_out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub model: Option<String>,
    /// Seed selecting the scene to plan in.
    #[arg(long)]
    pub scene_seed: Option<u64>,
    /// `heuristic` or a path to a file of initializations.
    #[arg(long)]
    pub inits: Option<String>,
    /// config-only or full-chain gradients.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub fd_eps: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub scenes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `all` or a comma-separated subset of the table columns.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub families: Option<String>,
    /// Record wall-clock times instead of zeros in the trial log.
    #[arg(long)]
    pub record_ms: bool,
    /// Per-trial log output path.
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct PlotDataArgs {
    /// Trial log written by `bench --out`.
    #[arg(long)]
    pub bench_log: Option<String>,
    /// Loss trace written by `train`.
    #[arg(long)]
    pub loss_trace: Option<String>,
    /// Output directory for the TSV tables.
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}
