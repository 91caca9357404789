use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mace_core::ErrorKind;

mod commands;

/// Estimate membership-inference risk from query outputs of members and
/// non-members.
#[derive(Parser)]
#[command(name = "mace", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the optimal membership advantage and write a JSON report.
    Audit(AuditArgs),
    /// Per-sample risk with confidence intervals.
    Risk(RiskArgs),
    /// Advantage cap implied by ε-differential privacy.
    DpBound(DpBoundArgs),
    /// Build query CSV from raw vectors and a synthetic dataset.
    #[command(subcommand)]
    Query(QueryCommand),
    /// Sample a query CSV from a toy distribution with a known answer.
    #[command(hide = true)]
    Simulate(SimulateArgs),
}

#[derive(Args, Clone)]
struct DensityArgs {
    /// `discrete` (histogram) or `continuous` (KDE).
    #[arg(long)]
    density: Option<String>,
    /// Bins per dimension, or `exact` for one cell per distinct output.
    #[arg(long)]
    bins: Option<String>,
    /// KDE bandwidth: `auto` (Scott) or a positive number. Implies continuous.
    #[arg(long)]
    bandwidth: Option<String>,
    /// KDE kernel: `gaussian` or `epanechnikov`. Implies continuous.
    #[arg(long)]
    kernel: Option<String>,
}

#[derive(Args)]
struct AuditArgs {
    /// Query CSV (`m,q1,...`).
    #[arg(required_unless_present = "config")]
    input: Option<PathBuf>,
    /// Read the whole configuration from JSON, e.g. a report's `config`.
    #[arg(long, conflicts_with_all = ["input", "prior", "metric", "density", "bins", "bandwidth", "kernel"])]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    prior: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Generalized metric to estimate; repeatable.
    #[arg(long)]
    metric: Vec<String>,
    #[command(flatten)]
    density: DensityArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    /// Resample this many labeled points instead of using the rows as given.
    #[arg(long)]
    n_samples: Option<usize>,
    /// Also compute per-sample risk for every row.
    #[arg(long)]
    per_sample: bool,
    #[arg(long, requires = "per_sample")]
    per_sample_csv: Option<PathBuf>,
    #[arg(long)]
    plot_csv: Option<PathBuf>,
    /// Compare against the ε-DP cap; repeatable.
    #[arg(long)]
    dp_epsilon: Vec<f64>,
    /// Report path. Without it the report goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RiskArgs {
    input: PathBuf,
    #[arg(long)]
    prior: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Generalized metric with a closed-form threshold. Default: |f_p|.
    #[arg(long)]
    metric: Option<String>,
    #[command(flatten)]
    density: DensityArgs,
    /// Query point `v1[,v2,...]`; repeatable. Default: every input row.
    #[arg(long)]
    at: Vec<String>,
    /// Output path; `.csv` writes a table, anything else JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DpBoundArgs {
    /// Privacy budget; repeatable.
    #[arg(long, required = true)]
    epsilon: Vec<f64>,
    #[arg(long)]
    prior: f64,
    /// Measured advantage to compare against the bound.
    #[arg(long)]
    advantage: Option<f64>,
    /// Lower confidence limit of the measured advantage.
    #[arg(long, requires = "advantage")]
    lower: Option<f64>,
}

#[derive(Args)]
struct QueryInputs {
    /// Member vectors (CSV or MACEVEC1 binary).
    #[arg(long)]
    members: PathBuf,
    /// Non-member vectors.
    #[arg(long)]
    nonmembers: PathBuf,
    /// Synthetic dataset the queries run against.
    #[arg(long)]
    synthetic: PathBuf,
    /// `l2` or `l1`.
    #[arg(long, default_value = "l2")]
    distance: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum QueryCommand {
    /// Distance to the nearest synthetic point.
    Nn(QueryInputs),
    /// Log fraction of synthetic points within a radius.
    Ball {
        #[command(flatten)]
        inputs: QueryInputs,
        #[arg(long)]
        radius: f64,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Member pmf over outcomes 0..k, comma separated.
    #[arg(long, requires = "nonmember_pmf", conflicts_with = "normal")]
    member_pmf: Option<String>,
    #[arg(long)]
    nonmember_pmf: Option<String>,
    /// Member and non-member means `mu1,mu2` of unit-width normals.
    #[arg(long)]
    normal: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    prior: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numerical => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Audit(a) => commands::audit(a),
        Command::Risk(a) => commands::risk(a),
        Command::DpBound(a) => commands::dp_bound(a),
        Command::Query(QueryCommand::Nn(inputs)) => commands::query(inputs, None),
        Command::Query(QueryCommand::Ball { inputs, radius }) => commands::query(inputs, Some(radius)),
        Command::Simulate(a) => commands::simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
