use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use skilltune_core::net::ModelKind;

/// Force-feedback skill adaptation experiments: record demonstrations,
/// train feedback models, compare them and run closed-loop rollouts.
///
/// Log verbosity follows the SKILLTUNE_LOG environment variable
/// (error, warn, info, debug, trace; default info). Exit status is 0 on
/// success, 1 on usage errors and 2 when a run fails.
#[derive(Debug, Parser)]
#[command(name = "skilltune", version, propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Record nominal, perturbed and corrected polishing episodes for every
    /// dataset in the config.
    Demo(DemoArgs),
    /// Train one feedback model on a recorded dataset.
    Train(TrainArgs),
    /// Record the configured datasets and train both models on each for
    /// every seed; writes loss curves, a final-loss table and checkpoints.
    Compare(CompareArgs),
    /// Run the evaluation scenario without feedback and with each given
    /// checkpoint closing the loop; reports normal-force RMSE.
    Rollout(RolloutArgs),
    /// Compare analytic and finite-difference gradients of a randomly
    /// initialized model.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Output directory (created if missing). Every file the command
    /// writes goes below it, including run_manifest.json.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Experiment config, TOML with SI units (m, s, N, rad). Defaults to the
    /// built-in demo: one sweep, the nominal run and five perturbations.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
    /// Base seed of the sensor noise (non-negative integer). Overrides
    /// environment.settings.seed.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory written by `demo` (contains manifest.json).
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Feedback architecture.
    #[arg(long, value_name = "MODEL", default_value = "pmdrnn", value_parser = parse_model)]
    pub model: ModelKind,
    /// Experiment config whose [train] table sets the learning rate,
    /// batch size (sequences), epochs, widths and gradient clipping.
    /// Defaults: learning rate 0.02, batch 8, 3000 epochs, 20 hidden units.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
    /// Seed of the weight initialization and batch shuffling
    /// (non-negative integer). Overrides train.seed.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Number of passes over the training sequences (count). Overrides
    /// train.epochs.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Experiment config, TOML with SI units (m, s, N, rad). Defaults to the
    /// built-in experiment with both datasets and five seeds.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
    /// Train with this single seed (non-negative integer) instead of the
    /// configured seed list.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Number of training epochs per run (count). Overrides train.epochs.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: Option<u64>,
    /// Only compare on the named dataset (repeatable). Defaults to all.
    #[arg(long, value_name = "NAME")]
    pub dataset: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    /// Experiment config naming the evaluation skill, perturbation and
    /// prefix window (s). Defaults to the built-in experiment.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// `none` for the no-feedback run only, or a checkpoint file written
    /// by `train` or `compare` (repeatable). The run without feedback is
    /// always included.
    #[arg(long, value_name = "none|FILE", required = true)]
    pub feedback: Vec<String>,
    #[command(flatten)]
    pub out: OutArg,
    /// Seed of the sensor noise during evaluation (non-negative integer).
    /// Overrides evaluation.seed.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Feedback architecture.
    #[arg(long, value_name = "MODEL", default_value = "pmdrnn", value_parser = parse_model)]
    pub model: ModelKind,
    /// Seed of the random weights and sequence (non-negative integer).
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub seed: u64,
    /// Sequence length (steps, 1 to 50).
    #[arg(long, value_name = "N", default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..=50))]
    pub steps: u64,
    #[command(flatten)]
    pub out: OutArg,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: skilltune_core::Error| e.to_string())
}
