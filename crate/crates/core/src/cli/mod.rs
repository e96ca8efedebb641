//! Command-line front end: config loading, subcommands and result files.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{run, ExperimentSpec, Figure, Sweep};
pub use config::{load_config, parse_config, parse_quantity, Quantity, DEFAULT_CONFIG};

#[derive(Debug, Parser)]
#[command(name = "smmc", version, about = "Set-up based merged multicast toolkit")]
pub struct Cli {
    /// Worker threads for parallel sections (defaults to all cores).
    #[arg(long, env = "SMMC_WORKERS", global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Jointly optimize set-up time and multicast rate.
    Optimize(OptimizeArgs),
    /// Evaluate the analytic bounds for a given plan.
    Bounds(BoundsArgs),
    /// Monte Carlo simulation of a plan.
    Simulate(SimulateArgs),
    /// Regenerate the data behind one of the standard figures.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML config; the built-in reference scenario when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Override the arrival rate, in requests per slot.
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Group-size tail mass that may be dropped from mixtures.
    #[arg(long, default_value_t = crate::bounds::DEFAULT_TAIL_TOLERANCE)]
    pub delta: f64,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PlanFlags {
    /// Unicast rate, e.g. `81.1Mbps` or bits per second.
    #[arg(long)]
    pub r_uc: Option<String>,

    /// Multicast rate, e.g. `122.6Mbps` or bits per second.
    #[arg(long)]
    pub r_mc: Option<String>,

    /// Set-up time in slots.
    #[arg(long)]
    pub t_set: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub common: Common,

    /// Evaluate every set-up time instead of coarse-then-fine.
    #[arg(long)]
    pub full_scan: bool,

    /// Also write the per-set-up-time trace and run record here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub common: Common,

    #[arg(long)]
    pub t_set: u64,

    #[arg(long)]
    pub r_uc: String,

    #[arg(long)]
    pub r_mc: String,

    /// Report a single group size; all sizes up to the tail cut otherwise.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,

    /// Plan JSON, either a bare plan or the output of `optimize`. Missing
    /// fields are filled by optimization.
    #[arg(long)]
    pub plan: Option<PathBuf>,

    #[command(flatten)]
    pub plan_flags: PlanFlags,

    /// smmc, ft (fine-tuned) or unicast.
    #[arg(long, default_value = "smmc")]
    pub mode: String,

    #[arg(long, default_value_t = 1000)]
    pub episodes: u64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReproduceArgs {
    /// fig3, fig4, fig5 or fig6.
    #[arg(long)]
    pub figure: String,

    #[command(flatten)]
    pub common: Common,

    #[command(flatten)]
    pub plan_flags: PlanFlags,

    /// Episodes per point; each figure has its own default.
    #[arg(long)]
    pub episodes: Option<u64>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value = "results")]
    pub out: PathBuf,

    /// Sweep start, in the swept variable's units.
    #[arg(long)]
    pub sweep_start: Option<String>,

    #[arg(long)]
    pub sweep_stop: Option<String>,

    #[arg(long)]
    pub sweep_step: Option<String>,

    /// Full set-up time scan when a plan has to be optimized.
    #[arg(long)]
    pub full_scan: bool,
}
