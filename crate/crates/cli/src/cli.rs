use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use exchange_lab_core::{Metric, RateFunction};

#[derive(Debug, Parser)]
#[command(
    name = "exchange-lab",
    version,
    about = "Dollar-exchange economy with a collective debt limit: simulation, exact laws, mean-field ODEs, equilibria",
    after_help = "Every subcommand accepts --config FILE with key=value lines; command-line flags override it.\nExit codes: 0 success, 1 computation error, 2 usage error."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the closed-form equilibrium and write p* over a window.
    Equilibrium(EquilibriumArgs),
    /// Run the agent-based simulation.
    Simulate(SimulateArgs),
    /// Integrate the two-phase mean-field ODE from a point mass at mu.
    Ode(OdeArgs),
    /// Exact per-agent stationary marginal of the finite chain.
    Exact(ExactArgs),
    /// Distance between two histogram CSVs.
    Compare(CompareArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

fn parse_window(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected MIN:MAX, got {s:?}"))?;
    let lo: i64 = a.trim().parse().map_err(|e| format!("bad MIN {a:?}: {e}"))?;
    let hi: i64 = b.trim().parse().map_err(|e| format!("bad MAX {b:?}: {e}"))?;
    if lo > -1 || hi < 1 {
        return Err(format!("window {lo}:{hi} must contain -1..=1"));
    }
    Ok((lo, hi))
}

fn parse_rate(s: &str) -> Result<RateFunction, String> {
    s.parse().map_err(|e: exchange_lab_core::Error| e.to_string())
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct EquilibriumArgs {
    #[arg(long)]
    pub mu: u64,
    #[arg(long)]
    pub nu: u64,
    /// CSV of p* (`n,probability`); a manifest is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Evaluation window MIN:MAX (default: [-150, 200] widened to the tails).
    #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
    pub window: Option<(i64, i64)>,
    /// Rate used to build the distribution (the solution assumes fstar).
    #[arg(long, default_value = "fstar", value_parser = parse_rate)]
    pub f: RateFunction,
    /// Bar chart of p*.
    #[arg(long, requires = "out")]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SimulateArgs {
    #[arg(long)]
    pub agents: usize,
    #[arg(long)]
    pub mu: u64,
    #[arg(long)]
    pub nu: u64,
    /// Binary exchanges per replica (blocked ones included).
    #[arg(long)]
    pub events: u64,
    #[arg(long)]
    pub seed: u64,
    /// fstar | fabs | const[:c] | table:k=v,...,default=v
    #[arg(long, default_value = "fstar", value_parser = parse_rate)]
    pub f: RateFunction,
    /// Record the empirical distribution every K exchanges.
    #[arg(long, value_name = "K")]
    pub snapshot_every: Option<u64>,
    /// Independent replicas with seeds seed, seed+1, ...; histograms are averaged.
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct OdeArgs {
    #[arg(long)]
    pub mu: u64,
    #[arg(long)]
    pub nu: u64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long)]
    pub t_end: f64,
    /// Snapshot times (default: every integer time up to t-end).
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
    pub window: Option<(i64, i64)>,
    #[arg(long, default_value = "fstar", value_parser = parse_rate)]
    pub f: RateFunction,
    /// Long-format trajectory CSV; the summary goes to `<out>.summary.csv`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExactMethod {
    Enumerate,
    ClosedForm,
}

impl fmt::Display for ExactMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExactMethod::Enumerate => "enumerate",
            ExactMethod::ClosedForm => "closed-form",
        })
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ExactArgs {
    #[arg(long)]
    pub agents: usize,
    /// Total money M held by the agents.
    #[arg(long, allow_hyphen_values = true)]
    pub money: i64,
    /// Bank reserve B_*, the cap on total debt.
    #[arg(long)]
    pub bank: u64,
    #[arg(long, value_enum, default_value_t = ExactMethod::ClosedForm)]
    pub method: ExactMethod,
    #[arg(long, default_value = "fstar", value_parser = parse_rate)]
    pub f: RateFunction,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct CompareArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// l2 | tv
    #[arg(long, default_value = "tv")]
    pub metric: Metric,
    /// Also write the result as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ReplayArgs {
    /// Manifest written by a previous run.
    pub manifest: PathBuf,
    /// Redirect the primary output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
