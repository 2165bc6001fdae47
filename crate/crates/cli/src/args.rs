use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug, Clone)]
#[command(
    name = "twofactor",
    version,
    about = "Main-effect and two-factor interaction analysis of experiment logs"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Estimation path.
#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    /// Conditional cell means.
    Cm,
    /// Least-squares fit to Shapley attributions.
    Sf,
}

impl PathKind {
    pub fn tag(&self) -> &'static str {
        match self {
            PathKind::Cm => "cm",
            PathKind::Sf => "sf",
        }
    }
}

/// Reference distribution for centering and attribution.
#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BackgroundKind {
    Uniform,
    /// Observed configuration frequencies of the log.
    Empirical,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GlobalArgs {
    /// Master seed for every random stream of the invocation.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Factor-space JSON.
    #[arg(long, global = true)]
    pub space: Option<PathBuf>,
    /// Run-log CSV.
    #[arg(long, global = true)]
    pub log: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = PathKind::Cm)]
    pub path: PathKind,
    #[arg(long, global = true, value_enum, default_value_t = BackgroundKind::Uniform)]
    pub background: BackgroundKind,
    #[arg(long = "lambda-risk", global = true)]
    pub lambda_risk: Option<f64>,
    #[arg(long = "lambda-cost", global = true)]
    pub lambda_cost: Option<f64>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Shrinkage pseudo-count.
    #[arg(long, global = true)]
    pub tau: Option<f64>,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Estimate the effect table and write plot data.
    Estimate(EstimateArgs),
    /// Search for the configuration maximizing the objective.
    Optimize(OptimizeArgs),
    /// Pairwise complementarity heatmap data.
    Pci(PciArgs),
    /// Sample sizes from concentration bounds.
    Plan(PlanArgs),
    /// Run a synthetic-teacher simulation suite.
    Simulate(SimulateArgs),
    /// Run ablation suites.
    Ablate(AblateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Estimate(_) => "estimate",
            Command::Optimize(_) => "optimize",
            Command::Pci(_) => "pci",
            Command::Plan(_) => "plan",
            Command::Simulate(_) => "simulate",
            Command::Ablate(_) => "ablate",
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EstimationArgs {
    /// Monte Carlo permutations per point on the SF path; exact attribution when omitted.
    #[arg(long = "shapley-samples")]
    pub shapley_samples: Option<usize>,
    /// Unit label written to every output header.
    #[arg(long, default_value = "response")]
    pub units: String,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub estimation: EstimationArgs,
    /// Bootstrap replicates for confidence intervals.
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0.95)]
    pub coverage: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub estimation: EstimationArgs,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    /// Random starts draw from the top-`beam` levels of each factor.
    #[arg(long, default_value_t = 3)]
    pub beam: usize,
    #[arg(long = "max-sweeps", default_value_t = 100)]
    pub max_sweeps: usize,
    #[arg(long = "eps-stop", default_value_t = 0.0)]
    pub eps_stop: f64,
    /// Size of the ranked configuration report.
    #[arg(long = "top-k", default_value_t = 10)]
    pub top_k: usize,
    /// Bootstrap replicates for the top-K intervals.
    #[arg(long, default_value_t = 200)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0.95)]
    pub coverage: f64,
    /// Objective JSON with costs, per-pair gammas and banned levels or configurations.
    #[arg(long)]
    pub objective: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PciArgs {
    #[command(flatten)]
    pub estimation: EstimationArgs,
    /// Weight cells by the reference pair marginal instead of uniformly.
    #[arg(long)]
    pub weighted: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PlanArgs {
    /// Response bound B; inferred from --log when omitted.
    #[arg(long = "B")]
    pub bound: Option<f64>,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Level counts `Lj,Lk` for a bound uniform over one pair's cells.
    #[arg(long)]
    pub levels: Option<String>,
    /// Number of simultaneous estimates covered by a union bound.
    #[arg(long)]
    pub union: Option<usize>,
    /// Size Monte Carlo Shapley sampling instead of cell runs.
    #[arg(long)]
    pub mc: bool,
    /// Baseline error ε₀ for the effect-level error budget.
    #[arg(long)]
    pub eps0: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value = "table2")]
    pub suite: String,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Suite configuration JSON; missing keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct AblateArgs {
    /// effects-order, design-robustness, shap-background, seed-budget or all.
    #[arg(default_value = "all")]
    pub axis: String,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}
