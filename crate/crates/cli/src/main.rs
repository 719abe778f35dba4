mod commands;
mod provenance;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ieca::bench::alloc::TrackingAllocator;
use ieca::Error;

#[global_allocator]
static GLOBAL: TrackingAllocator = TrackingAllocator;

#[derive(Parser, Debug)]
#[command(
    name = "ieca",
    version = concat!(env!("CARGO_PKG_VERSION"), " (interface ", "1.0", ")"),
    about = "Evolutionary clustering with elbow-based k selection, validation and benchmarking",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cluster a dataset and write labels, centroids and the fitness trace.
    Cluster(ClusterArgs),
    /// Print the SSE-versus-k curve and the chosen k.
    Elbow(ElbowArgs),
    /// Score a labelling against ground truth.
    Validate(ValidateArgs),
    /// Run the multi-trial protocol and rank algorithms.
    Bench(BenchArgs),
    /// Rank algorithms from per-metric score or rank tables and draw a heatmap.
    Rank(RankArgs),
}

#[derive(Args, Debug, Clone)]
struct InputArgs {
    /// Delimited data file.
    #[arg(long)]
    input: PathBuf,
    /// Field delimiter.
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// The first line holds data rather than column names.
    #[arg(long)]
    no_header: bool,
    /// Column holding class labels; it is removed before clustering.
    #[arg(long)]
    target: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct EngineArgs {
    #[arg(long, default_value = "ieca")]
    mode: String,
    /// `auto` (elbow scan) or a starting cluster count.
    #[arg(long, default_value = "auto")]
    k: String,
    /// Social class ranks S of the baseline mode.
    #[arg(long, default_value_t = 2)]
    ranks: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    iters: usize,
    /// Cluster density ratio.
    #[arg(long, default_value_t = 0.001)]
    density: f64,
    /// Lévy step scale.
    #[arg(long, default_value_t = 0.001)]
    alpha: f64,
    #[arg(long, default_value_t = 1.5)]
    beta: f64,
    /// Upper end of the elbow scan (default min(10, ⌈√N⌉)).
    #[arg(long)]
    kmax: Option<usize>,
}

#[derive(Args, Debug)]
struct ClusterArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    engine: EngineArgs,
    /// Labels file (`row,label`).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    centroids: Option<PathBuf>,
    /// Fitness trace; defaults to trace.csv next to --out.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Cleaning log as JSON lines.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ElbowArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the curve as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Predicted labels (`row,label`).
    #[arg(long)]
    labels: PathBuf,
    /// True labels (`row,label` or one label per line).
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Centroids in attribute units, one row per label id.
    #[arg(long)]
    centroids: Option<PathBuf>,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    #[arg(long)]
    no_header: bool,
    /// Class column inside --data to drop before scoring.
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    engine: EngineArgs,
    /// Ground-truth labels file, when --target is not used.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    runs: usize,
    /// Worker threads for the trials (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Also run the ECA* baseline.
    #[arg(long)]
    baseline: bool,
    /// Externally produced labels, `NAME=labels.csv`; repeatable.
    #[arg(long, value_name = "NAME=PATH")]
    external: Vec<String>,
    /// Dataset name used in reports (default: input file stem).
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, default_value = "bench-out")]
    out_dir: PathBuf,
    /// Write the labels and fitness trace of every run here.
    #[arg(long)]
    labels_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RankArgs {
    /// Metric × algorithm score tables, one per dataset.
    #[arg(long, conflicts_with = "ranks")]
    scores: Vec<PathBuf>,
    /// Metric × algorithm rank tables, one per dataset.
    #[arg(long)]
    ranks: Vec<PathBuf>,
    #[arg(long, default_value = "rank-out")]
    out_dir: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parameter(_) => 1,
        e if e.is_data_error() => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Cluster(a) => commands::cluster(a),
        Command::Elbow(a) => commands::elbow(a),
        Command::Validate(a) => commands::validate(a),
        Command::Bench(a) => commands::bench(a),
        Command::Rank(a) => commands::rank(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
