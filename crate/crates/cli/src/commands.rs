use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use kgroup::bench::{aggregates_csv, run_sweep, runs_csv, BenchSweep};
use kgroup::hypergraph::generate::{erdos_renyi, random_hypergraph, GENERATOR_VERSION};
use kgroup::hypergraph::{serialize_edgelist, serialize_hgr, Hypergraph};
use kgroup::oracle::{brute_force, verify_groups, OracleError, VerifyReport};
use kgroup::problems::{compile, default_groups, CompileOptions, Problem};
use kgroup::run::{self, InputFormat, Metrics, RunConfig, SCHEMA_VERSION, TOOL_VERSION};
use kgroup::trainer::{trace_csv, AnnealSchedule};

use crate::{BenchArgs, GenerateArgs, GenerateKind, InstanceArgs, OracleArgs, SolveArgs, VerifyArgs};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Writes to `path`, or stdout when there is none.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn load_instance(path: &Path, format: Option<InputFormat>) -> Result<Hypergraph> {
    let text = read(path)?;
    let format = format.unwrap_or_else(|| InputFormat::from_path(path));
    format
        .parse(&text)
        .with_context(|| format!("cannot parse {}", path.display()))
}

fn instance_from(args: &InstanceArgs) -> Result<Hypergraph> {
    let path = args.input.as_deref().context("--input is required")?;
    load_instance(path, args.format)
}

fn exit_for(feasible: bool) -> ExitCode {
    if feasible {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn compile_options(
    k: Option<usize>,
    alpha: Option<f64>,
    beta: Option<f64>,
    mis_penalty: Option<f64>,
) -> CompileOptions {
    let mut opts = CompileOptions::default();
    opts.groups = k.or(opts.groups);
    opts.alpha = alpha.unwrap_or(opts.alpha);
    opts.beta = beta.unwrap_or(opts.beta);
    opts.mis_penalty = mis_penalty.unwrap_or(opts.mis_penalty);
    opts
}

fn run_config(args: &SolveArgs) -> Result<RunConfig> {
    let mut overlay = match &args.config {
        Some(path) => {
            serde_json::from_str(&read(path)?).with_context(|| format!("{} is not valid JSON", path.display()))?
        }
        None => json!({}),
    };
    let from_file = overlay
        .get("problem")
        .map(|p| serde_json::from_value::<Problem>(p.clone()))
        .transpose()
        .context("invalid \"problem\" in config")?;
    let problem = args
        .problem
        .or(from_file)
        .context("--problem is required (or set \"problem\" in --config)")?;
    // through the overlay so the backend's default learning rate applies
    if let Some(backend) = args.backend {
        run::merge_json(&mut overlay, &json!({"train": {"encoder": {"backend": backend}}}));
    }
    let mut config = RunConfig::with_overrides(problem, &overlay).context("invalid run config")?;
    config.problem = problem;

    let compile = &mut config.compile;
    compile.groups = args.k.or(compile.groups);
    compile.alpha = args.alpha.unwrap_or(compile.alpha);
    compile.beta = args.beta.unwrap_or(compile.beta);
    compile.mis_penalty = args.mis_penalty.unwrap_or(compile.mis_penalty);
    let train = &mut config.train;
    if let Some(v) = args.epochs {
        train.epochs = v;
    }
    if let Some(v) = args.restarts {
        train.restarts = v;
    }
    if let Some(v) = args.seed {
        train.seed = v;
    }
    if let Some(v) = args.layers {
        train.encoder.layers = v;
    }
    if let Some(v) = args.lr {
        train.optimizer.learning_rate = v;
    }
    if args.no_anneal {
        train.anneal = None;
    } else if args.gamma0.is_some() || args.zero_epoch.is_some() {
        let base = train.anneal.unwrap_or(AnnealSchedule::new(-2.5, 1000));
        let mut schedule = AnnealSchedule::new(
            args.gamma0.unwrap_or(base.gamma0),
            args.zero_epoch.unwrap_or(base.zero_epoch),
        );
        if base.cap.is_some() && args.gamma0.is_none() {
            schedule.cap = base.cap;
        }
        train.anneal = Some(schedule);
    }
    if let Some(input) = &args.instance.input {
        config.input = Some(input.clone());
    }
    if args.instance.format.is_some() {
        config.format = args.instance.format;
    }
    if args.output.is_some() {
        config.output = args.output.clone();
    }
    if args.trace.is_some() {
        config.trace = args.trace.clone();
    }
    Ok(config)
}

pub fn solve(args: SolveArgs) -> Result<ExitCode> {
    let config = run_config(&args)?;
    let input = config
        .input
        .clone()
        .context("--input is required (or set \"input\" in --config)")?;
    let instance = load_instance(&input, config.format)?;
    let outcome = run::solve(&config, &instance)?;
    let r = &outcome.result;
    emit(config.output.as_deref(), &to_json(r)?)?;
    if let Some(path) = &config.trace {
        write(path, &trace_csv(&outcome.trace))?;
    }
    eprintln!(
        "{}: {} with objective {} (k = {}, {} violated terms) in {:.2}s",
        r.problem,
        if r.feasible { "feasible" } else { "infeasible" },
        r.objective,
        r.k,
        r.metrics.violated_terms,
        r.wall_time_seconds
    );
    Ok(exit_for(r.feasible))
}

/// Assignment, group count and stored metric block from a solution file.
fn read_solution(path: &Path) -> Result<(Vec<usize>, Option<usize>, Option<Metrics>)> {
    let value: Value =
        serde_json::from_str(&read(path)?).with_context(|| format!("{} is not valid JSON", path.display()))?;
    let (assignment, k, metrics) = match &value {
        Value::Array(_) => (value.clone(), None, None),
        Value::Object(map) => (
            map.get("assignment")
                .cloned()
                .context("solution object has no \"assignment\"")?,
            map.get("k").cloned(),
            map.get("metrics").cloned(),
        ),
        _ => bail!("solution must be a JSON array or an object with \"assignment\""),
    };
    let assignment: Vec<usize> =
        serde_json::from_value(assignment).context("\"assignment\" must be an array of group indices")?;
    let k = k
        .map(serde_json::from_value)
        .transpose()
        .context("\"k\" must be a count")?;
    let metrics = metrics
        .map(serde_json::from_value)
        .transpose()
        .context("malformed \"metrics\" block")?;
    Ok((assignment, k, metrics))
}

#[derive(Serialize)]
struct VerifyOutput {
    #[serde(flatten)]
    report: VerifyReport,
    /// Whether a metric block stored with the solution matches the recount.
    #[serde(skip_serializing_if = "Option::is_none")]
    stored_metrics_match: Option<bool>,
}

pub fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let instance = instance_from(&args.instance)?;
    let (assignment, stored_k, stored) = read_solution(&args.solution)?;
    let largest = assignment.iter().max().map_or(0, |g| g + 1);
    let k = args
        .k
        .or(stored_k)
        .unwrap_or_else(|| default_groups(args.problem, &instance).max(largest));
    let report = verify_groups(args.problem, &instance, &assignment, k)?;
    let matches = stored.map(|m| m == Metrics::from(&report));
    eprintln!(
        "{}: {}, {} violated terms, objective {}, B1 {:.4}, B2 {:.4}",
        args.problem,
        if report.feasible { "feasible" } else { "infeasible" },
        report.violated_terms,
        report.objective,
        report.b1,
        report.b2
    );
    if matches == Some(false) {
        eprintln!("warning: stored metrics differ from the recount");
    }
    let feasible = report.feasible;
    let out = VerifyOutput {
        report,
        stored_metrics_match: matches,
    };
    emit(args.output.as_deref(), &to_json(&out)?)?;
    Ok(exit_for(feasible))
}

#[derive(Serialize)]
struct OracleOutput<'a> {
    schema: u32,
    version: &'a str,
    problem: Problem,
    k: usize,
    value: f64,
    feasible: bool,
    assignment: &'a [usize],
    evaluated: u64,
    report: &'a VerifyReport,
}

pub fn oracle(args: OracleArgs) -> Result<ExitCode> {
    let instance = instance_from(&args.instance)?;
    let opts = compile_options(args.k, args.alpha, args.beta, args.mis_penalty);
    let loss = compile(args.problem, &instance, &opts)?;
    let best = match brute_force(&loss, args.limit) {
        Err(OracleError::OverLimit { required, limit }) => {
            bail!("search space of {required} assignments exceeds the limit of {limit}; rerun with --limit {required}")
        }
        other => other?,
    };
    let out = OracleOutput {
        schema: SCHEMA_VERSION,
        version: TOOL_VERSION,
        problem: args.problem,
        k: loss.k(),
        value: best.value,
        feasible: best.report.feasible,
        assignment: &best.groups,
        evaluated: best.evaluated,
        report: &best.report,
    };
    emit(args.output.as_deref(), &to_json(&out)?)?;
    eprintln!(
        "{}: optimum {} over {} assignments (k = {})",
        args.problem,
        best.value,
        best.evaluated,
        loss.k()
    );
    Ok(exit_for(best.report.feasible))
}

pub fn bench(args: BenchArgs) -> Result<ExitCode> {
    let sweep: BenchSweep = serde_json::from_str(&read(&args.sweep)?)
        .with_context(|| format!("invalid sweep file {}", args.sweep.display()))?;
    let report = run_sweep(&sweep, args.timing)?;
    emit(args.output.as_deref(), &runs_csv(&report.runs)?)?;
    if let Some(path) = &args.summary {
        write(path, &aggregates_csv(&report.aggregates)?)?;
    }
    for a in &report.aggregates {
        eprintln!(
            "{}: {} runs, {} feasible, objective {:.3} +- {:.3}",
            a.config, a.runs, a.feasible_runs, a.objective_mean, a.objective_stddev
        );
    }
    Ok(ExitCode::SUCCESS)
}

pub fn generate(args: GenerateArgs) -> Result<ExitCode> {
    let text = match args.kind {
        GenerateKind::Er { vertices, edges, seed } => {
            let g = erdos_renyi(vertices, edges, seed)?;
            format!(
                "# er vertices={vertices} edges={edges} seed={seed} generator={GENERATOR_VERSION}\n{}",
                serialize_edgelist(&g)
            )
        }
        GenerateKind::Hypergraph {
            vertices,
            edges,
            min_size,
            max_size,
            seed,
        } => {
            let h = random_hypergraph(vertices, edges, min_size, max_size, seed)?;
            format!(
                "% hypergraph vertices={vertices} edges={edges} sizes={min_size}..={max_size} seed={seed} generator={GENERATOR_VERSION}\n{}",
                serialize_hgr(&h)
            )
        }
    };
    emit(args.output.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}
