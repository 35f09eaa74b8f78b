use serde::{Deserialize, Serialize};

use kgroup::hypergraph::generate::erdos_renyi;
use kgroup::hypergraph::serialize_edgelist;
use kgroup::oracle::VerifyReport;
use kgroup::problems::{compile, CompileOptions, Problem};
use kgroup::run::InputFormat;
use kgroup::trainer::{gini_rows, train, AnnealSchedule, Backend, TrainConfig};

use crate::layout::spring_layout;

/// Most trace points sent back to the page.
const MAX_TRACE_POINTS: usize = 400;

pub fn gamma_schedule(gamma0: f64, zero_epoch: usize, epochs: usize) -> Result<Vec<f64>, String> {
    if !gamma0.is_finite() || zero_epoch == 0 {
        return Err("gamma0 must be finite and the zero epoch positive".into());
    }
    let schedule = AnnealSchedule::new(gamma0, zero_epoch);
    Ok((0..=epochs).map(|t| schedule.gamma(t)).collect())
}

pub fn generate_graph(vertices: usize, edges: usize, seed: u64) -> Result<String, String> {
    let g = erdos_renyi(vertices, edges, seed).map_err(|e| e.to_string())?;
    Ok(serialize_edgelist(&g))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub k: Option<usize>,
    pub epochs: usize,
    pub restarts: usize,
    pub seed: u64,
    /// `false` runs with the annealing weight fixed at zero.
    pub anneal: bool,
    pub gamma0: Option<f64>,
    pub zero_epoch: Option<usize>,
    pub beta: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            k: None,
            epochs: 1500,
            restarts: 4,
            seed: 0,
            anneal: true,
            gamma0: None,
            zero_epoch: None,
            beta: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TracePoint {
    pub epoch: usize,
    pub loss: f64,
    pub mean_gini: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveView {
    pub problem: Problem,
    pub k: usize,
    pub num_vertices: usize,
    pub edges: Vec<Vec<usize>>,
    pub assignment: Vec<usize>,
    pub feasible: bool,
    pub objective: f64,
    pub report: VerifyReport,
    pub first_feasible_epoch: Option<usize>,
    pub trace: Vec<TracePoint>,
    /// Row Gini of the final relaxed assignment.
    pub gini: Vec<f64>,
    /// Vertex positions in the unit square.
    pub layout: Vec<[f64; 2]>,
}

pub fn parse_format(format: &str) -> Result<InputFormat, String> {
    match format {
        "hgr" => Ok(InputFormat::Hgr),
        "edgelist" | "" => Ok(InputFormat::Edgelist),
        other => Err(format!("unknown format {other:?}")),
    }
}

pub fn solve_view(problem: &str, instance: &str, format: &str, options: &SolveOptions) -> Result<SolveView, String> {
    let problem: Problem = problem
        .parse()
        .map_err(|e: kgroup::problems::UnknownProblem| e.to_string())?;
    let h = parse_format(format)?.parse(instance).map_err(|e| e.to_string())?;

    let mut opts = CompileOptions {
        groups: options.k,
        ..CompileOptions::default()
    };
    opts.beta = options.beta.unwrap_or(opts.beta);
    let loss = compile(problem, &h, &opts).map_err(|e| e.to_string())?;

    let mut config = TrainConfig::for_problem(problem, Backend::Direct);
    config.epochs = options.epochs;
    config.restarts = options.restarts;
    config.seed = options.seed;
    config.anneal = match (options.anneal, config.anneal) {
        (false, _) => None,
        (true, base) => {
            let base = base.unwrap_or(AnnealSchedule::new(-2.5, 1000));
            Some(AnnealSchedule::new(
                options.gamma0.unwrap_or(base.gamma0),
                options.zero_epoch.unwrap_or(base.zero_epoch),
            ))
        }
    };
    let result = train(&loss, &config).map_err(|e| e.to_string())?;

    let stride = result.trace.len().div_ceil(MAX_TRACE_POINTS).max(1);
    let last = result.trace.len().saturating_sub(1);
    let trace = result
        .trace
        .iter()
        .enumerate()
        .filter(|(i, _)| i % stride == 0 || *i == last)
        .map(|(_, r)| TracePoint {
            epoch: r.epoch,
            loss: r.loss,
            mean_gini: r.mean_gini,
            gamma: r.gamma,
        })
        .collect();
    let drawn = h.clique_expansion();
    let layout = spring_layout(h.num_vertices(), &drawn.edge_pairs().collect::<Vec<_>>(), options.seed);
    Ok(SolveView {
        problem,
        k: loss.k(),
        num_vertices: h.num_vertices(),
        edges: h.edges().to_vec(),
        feasible: result.report.feasible,
        objective: result.report.objective,
        report: result.report,
        assignment: result.groups,
        first_feasible_epoch: result.epochs_to_first_feasible,
        trace,
        gini: gini_rows(&result.relaxed),
        layout,
    })
}

pub fn solve(problem: &str, instance: &str, format: &str, options: &str) -> Result<String, String> {
    let options: SolveOptions = if options.trim().is_empty() {
        SolveOptions::default()
    } else {
        serde_json::from_str(options).map_err(|e| format!("bad options: {e}"))?
    };
    let view = solve_view(problem, instance, format, &options)?;
    serde_json::to_string(&view).map_err(|e| e.to_string())
}
