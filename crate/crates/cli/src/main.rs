mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sptucker::engine::{IterationBudget, UpdateOrder};
use sptucker::schemes::{CoarseVariant, SchemeKind};

#[derive(Parser, Debug)]
#[command(name = "sptucker", version, about = "Sparse Tucker decomposition with simulated distributed HOOI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Distribute a tensor and report the scheme's metrics.
    Distribute(DistributeArgs),
    /// Run HOOI over simulated ranks and write the model and reports.
    Decompose(DecomposeArgs),
    /// Metrics of several schemes and rank counts as one CSV.
    Compare(CompareArgs),
    /// Dense reference HOOI on a small tensor.
    #[command(hide = true)]
    Oracle(OracleArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SchemeArgs {
    /// Input tensor in `.tns` format.
    #[arg(long)]
    pub input: PathBuf,
    /// Number of simulated ranks.
    #[arg(short = 'P', long = "ranks", default_value_t = 1)]
    pub ranks: usize,
    #[arg(long, default_value = "lite", value_parser = parse_scheme)]
    pub scheme: SchemeKind,
    /// Policy file for `--scheme external`.
    #[arg(long)]
    pub policy_file: Option<PathBuf>,
    #[arg(long, default_value = "contiguous", value_parser = parse_variant)]
    pub coarse_variant: CoarseVariant,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Core lengths: one value for every mode, or a comma-separated list.
    #[arg(long, default_value = "10")]
    pub core: String,
}

#[derive(Args, Debug)]
pub struct DistributeArgs {
    #[command(flatten)]
    pub scheme: SchemeArgs,
    /// Where to write the policy file.
    #[arg(long)]
    pub policy_out: Option<PathBuf>,
    /// Where to write the metrics JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Where to write the metrics CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long, default_value_t = 5)]
    pub invocations: usize,
    /// Stop early once the fit changes by less than this.
    #[arg(long)]
    pub fit_tol: Option<f64>,
    /// Lanczos steps per SVD: `2k`, `exhaustive` or a count.
    #[arg(long, default_value = "2k", value_parser = parse_budget)]
    pub lanczos: IterationBudget,
    #[arg(long, default_value = "sequential", value_parser = parse_update)]
    pub update: UpdateOrder,
    /// Worker threads for the simulated ranks.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Where to write the run report JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Where to write the metrics CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Directory for the factor, core and manifest files.
    #[arg(long)]
    pub model_dir: Option<PathBuf>,
    /// Cross-check the fit against the dense reference.
    #[arg(long)]
    pub oracle_check: bool,
    /// Fail with a distinct exit code when numerical flags are raised.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Input tensors in `.tns` format.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Rank counts, comma-separated.
    #[arg(short = 'P', long = "ranks", default_value = "4", value_delimiter = ',')]
    pub ranks: Vec<usize>,
    #[arg(long, default_value = "coarse,medium,lite", value_delimiter = ',', value_parser = parse_scheme)]
    pub schemes: Vec<SchemeKind>,
    #[arg(long, default_value = "contiguous", value_parser = parse_variant)]
    pub coarse_variant: CoarseVariant,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = "10")]
    pub core: String,
    /// Where to write the CSV; standard output otherwise.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "10")]
    pub core: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub invocations: usize,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn parse_scheme(s: &str) -> Result<SchemeKind, String> {
    s.parse().map_err(|e: sptucker::Error| e.to_string())
}

fn parse_variant(s: &str) -> Result<CoarseVariant, String> {
    match s {
        "contiguous" => Ok(CoarseVariant::Contiguous),
        "bestfit" => Ok(CoarseVariant::BestFit),
        other => Err(format!("unknown coarse variant {other:?} (contiguous or bestfit)")),
    }
}

fn parse_budget(s: &str) -> Result<IterationBudget, String> {
    s.parse().map_err(|e: sptucker::Error| e.to_string())
}

fn parse_update(s: &str) -> Result<UpdateOrder, String> {
    match s {
        "sequential" => Ok(UpdateOrder::Sequential),
        "simultaneous" => Ok(UpdateOrder::Simultaneous),
        other => Err(format!("unknown update order {other:?} (sequential or simultaneous)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Distribute(a) => commands::distribute(&a),
        Command::Decompose(a) => commands::decompose(&a),
        Command::Compare(a) => commands::compare(&a),
        Command::Oracle(a) => commands::oracle(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
