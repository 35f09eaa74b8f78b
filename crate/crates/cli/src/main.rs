use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kgroup::problems::Problem;
use kgroup::run::InputFormat;
use kgroup::trainer::Backend;

mod commands;

/// Train one-hot relaxations for k-grouping problems and check the answers.
#[derive(Debug, Parser)]
#[command(name = "kgroup", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train on an instance and write the best assignment as JSON.
    Solve(SolveArgs),
    /// Recount a stored assignment from first principles.
    Verify(VerifyArgs),
    /// Exhaustively solve a tiny instance.
    Oracle(OracleArgs),
    /// Run a sweep file and write per-run and aggregate CSV.
    Bench(BenchArgs),
    /// Write a seeded random instance.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
struct InstanceArgs {
    /// Instance file (`.hgr` for hMETIS, anything else an edge list).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Override the format guessed from the extension.
    #[arg(long, value_parser = parse_format)]
    format: Option<InputFormat>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    problem: Option<Problem>,
    #[command(flatten)]
    instance: InstanceArgs,
    /// Partial run config (JSON) layered under the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of groups, or the color budget K_max for coloring.
    #[arg(long, visible_alias = "kmax")]
    k: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_backend)]
    backend: Option<Backend>,
    #[arg(long)]
    layers: Option<usize>,
    /// Adam learning rate.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma0: Option<f64>,
    /// Epoch at which the annealing weight crosses zero.
    #[arg(long)]
    zero_epoch: Option<usize>,
    /// Turn annealing off (gamma fixed at 0).
    #[arg(long, conflicts_with_all = ["gamma0", "zero_epoch"])]
    no_anneal: bool,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    mis_penalty: Option<f64>,
    /// Result JSON path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Epoch trace CSV of the winning restart.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    problem: Problem,
    #[command(flatten)]
    instance: InstanceArgs,
    /// A solve result, `{"assignment": [...]}`, or a bare JSON array.
    #[arg(long)]
    solution: PathBuf,
    /// Number of groups; defaults to the solution's `k`.
    #[arg(long, visible_alias = "kmax")]
    k: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long)]
    problem: Problem,
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, visible_alias = "kmax")]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    mis_penalty: Option<f64>,
    /// Largest number of assignments to enumerate.
    #[arg(long, default_value_t = kgroup::oracle::DEFAULT_SEARCH_LIMIT)]
    limit: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Sweep JSON: generators, seeds and named configs.
    #[arg(long)]
    sweep: PathBuf,
    /// Per-run CSV; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Per-config mean/stddev CSV.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Fill in wall-clock columns (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(subcommand)]
    kind: GenerateKind,
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum GenerateKind {
    /// Erdős–Rényi graph with an exact edge count, as an edge list.
    Er {
        #[arg(long)]
        vertices: usize,
        #[arg(long)]
        edges: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Random hypergraph with uniform hyperedge sizes, as `.hgr`.
    Hypergraph {
        #[arg(long)]
        vertices: usize,
        #[arg(long)]
        edges: usize,
        #[arg(long, default_value_t = 2)]
        min_size: usize,
        #[arg(long, default_value_t = 4)]
        max_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_format(s: &str) -> Result<InputFormat, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown format {s:?} (hgr, edgelist)"))
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown backend {s:?} (direct, message-passing)"))
}

/// Sizes the global thread pool from `KGROUP_THREADS`, if set.
fn init_threads() -> anyhow::Result<()> {
    if let Ok(value) = std::env::var("KGROUP_THREADS") {
        let n: usize = value
            .parse()
            .map_err(|_| anyhow::anyhow!("KGROUP_THREADS must be a positive integer, got {value:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = init_threads().and_then(|()| match cli.command {
        Command::Solve(args) => commands::solve(args),
        Command::Verify(args) => commands::verify(args),
        Command::Oracle(args) => commands::oracle(args),
        Command::Bench(args) => commands::bench(args),
        Command::Generate(args) => commands::generate(args),
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
