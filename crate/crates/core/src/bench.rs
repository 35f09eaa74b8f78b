//! Benchmark sweeps: generators x seeds x configs, flattened to CSV.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::hypergraph::generate::{erdos_renyi, random_hypergraph, GenerateError, GENERATOR_VERSION};
use crate::hypergraph::Hypergraph;
use crate::problems::Problem;
use crate::run::{solve, RunConfig, RunError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    ErdosRenyi {
        vertices: usize,
        edges: usize,
    },
    RandomHypergraph {
        vertices: usize,
        edges: usize,
        min_size: usize,
        max_size: usize,
    },
}

impl GeneratorSpec {
    pub fn label(&self) -> String {
        match self {
            GeneratorSpec::ErdosRenyi { vertices, edges } => format!("er-{vertices}-{edges}"),
            GeneratorSpec::RandomHypergraph {
                vertices,
                edges,
                min_size,
                max_size,
            } => format!("hyper-{vertices}-{edges}-{min_size}-{max_size}"),
        }
    }

    pub fn generate(&self, seed: u64) -> Result<Hypergraph, GenerateError> {
        match *self {
            GeneratorSpec::ErdosRenyi { vertices, edges } => {
                erdos_renyi(vertices, edges, seed).map(|g| g.into_hypergraph())
            }
            GeneratorSpec::RandomHypergraph {
                vertices,
                edges,
                min_size,
                max_size,
            } => random_hypergraph(vertices, edges, min_size, max_size, seed),
        }
    }
}

/// One named configuration. `overrides` is a partial [`RunConfig`] object
/// layered over the problem defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub name: String,
    pub problem: Problem,
    #[serde(default)]
    pub overrides: Value,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchSweep {
    pub generators: Vec<GeneratorSpec>,
    /// Used both as the instance seed and as the training seed.
    pub seeds: Vec<u64>,
    pub configs: Vec<BenchConfig>,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config {name:?}: {source}")]
    Config { name: String, source: serde_json::Error },
    #[error("generator {label} seed {seed}: {source}")]
    Generate {
        label: String,
        seed: u64,
        source: GenerateError,
    },
    #[error("config {name:?} on {label} seed {seed}: {source}")]
    Run {
        name: String,
        label: String,
        seed: u64,
        source: RunError,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub config: String,
    pub problem: Problem,
    pub generator: String,
    pub generator_version: u32,
    pub seed: u64,
    pub vertices: usize,
    pub edges: usize,
    pub k: usize,
    pub objective: f64,
    pub feasible: bool,
    pub violated_terms: usize,
    pub b1: f64,
    pub b2: f64,
    pub mean_gini: Option<f64>,
    pub epochs_to_first_feasible: Option<usize>,
    /// Left empty unless timing was requested, so output is reproducible.
    pub time_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub config: String,
    pub problem: Problem,
    pub runs: usize,
    pub feasible_runs: usize,
    pub objective_mean: f64,
    pub objective_stddev: f64,
    pub mean_gini_mean: Option<f64>,
    pub time_mean: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    pub runs: Vec<BenchRow>,
    pub aggregates: Vec<AggregateRow>,
}

struct Job<'a> {
    name: &'a str,
    config: RunConfig,
    generator: &'a GeneratorSpec,
    seed: u64,
    instance: Hypergraph,
}

fn run_job(job: &Job<'_>, timing: bool) -> Result<BenchRow, BenchError> {
    let out = solve(&job.config, &job.instance).map_err(|source| BenchError::Run {
        name: job.name.to_string(),
        label: job.generator.label(),
        seed: job.seed,
        source,
    })?;
    let r = out.result;
    let mean_gini = r.restarts.get(r.best_restart).and_then(|s| s.final_mean_gini);
    Ok(BenchRow {
        config: job.name.to_string(),
        problem: r.problem,
        generator: job.generator.label(),
        generator_version: GENERATOR_VERSION,
        seed: job.seed,
        vertices: job.instance.num_vertices(),
        edges: job.instance.num_edges(),
        k: r.k,
        objective: r.objective,
        feasible: r.feasible,
        violated_terms: r.metrics.violated_terms,
        b1: r.metrics.b1,
        b2: r.metrics.b2,
        mean_gini,
        epochs_to_first_feasible: r.epochs_to_first_feasible,
        time_seconds: timing.then_some(r.wall_time_seconds),
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; zero for a single run.
fn stddev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn aggregate(config: &BenchConfig, rows: &[BenchRow]) -> Option<AggregateRow> {
    let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.config == config.name).collect();
    if mine.is_empty() {
        return None;
    }
    let objectives: Vec<f64> = mine.iter().map(|r| r.objective).collect();
    let ginis: Option<Vec<f64>> = mine.iter().map(|r| r.mean_gini).collect();
    let times: Option<Vec<f64>> = mine.iter().map(|r| r.time_seconds).collect();
    Some(AggregateRow {
        config: config.name.clone(),
        problem: config.problem,
        runs: mine.len(),
        feasible_runs: mine.iter().filter(|r| r.feasible).count(),
        objective_mean: mean(&objectives),
        objective_stddev: stddev(&objectives),
        mean_gini_mean: ginis.map(|g| mean(&g)),
        time_mean: times.map(|t| mean(&t)),
    })
}

/// Runs every (config, generator, seed) combination. Row order follows
/// that nesting regardless of how runs are scheduled.
pub fn run_sweep(sweep: &BenchSweep, timing: bool) -> Result<BenchReport, BenchError> {
    let mut jobs = Vec::new();
    for c in &sweep.configs {
        let base = RunConfig::with_overrides(c.problem, &c.overrides).map_err(|source| BenchError::Config {
            name: c.name.clone(),
            source,
        })?;
        for g in &sweep.generators {
            for &seed in &sweep.seeds {
                let instance = g.generate(seed).map_err(|source| BenchError::Generate {
                    label: g.label(),
                    seed,
                    source,
                })?;
                let mut config = base.clone();
                config.train.seed = seed;
                jobs.push(Job {
                    name: &c.name,
                    config,
                    generator: g,
                    seed,
                    instance,
                });
            }
        }
    }
    #[cfg(feature = "parallel")]
    let rows: Result<Vec<_>, _> = {
        use rayon::prelude::*;
        jobs.par_iter().map(|j| run_job(j, timing)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Result<Vec<_>, _> = jobs.iter().map(|j| run_job(j, timing)).collect();
    let runs = rows?;
    let aggregates = sweep.configs.iter().filter_map(|c| aggregate(c, &runs)).collect();
    Ok(BenchReport { runs, aggregates })
}

fn to_csv<T: Serialize>(header: &[&str], rows: &[T]) -> Result<String, BenchError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub const RUNS_HEADER: &[&str] = &[
    "config",
    "problem",
    "generator",
    "generator_version",
    "seed",
    "vertices",
    "edges",
    "k",
    "objective",
    "feasible",
    "violated_terms",
    "b1",
    "b2",
    "mean_gini",
    "epochs_to_first_feasible",
    "time_seconds",
];

pub const AGGREGATE_HEADER: &[&str] = &[
    "config",
    "problem",
    "runs",
    "feasible_runs",
    "objective_mean",
    "objective_stddev",
    "mean_gini_mean",
    "time_mean",
];

pub fn runs_csv(rows: &[BenchRow]) -> Result<String, BenchError> {
    to_csv(RUNS_HEADER, rows)
}

pub fn aggregates_csv(rows: &[AggregateRow]) -> Result<String, BenchError> {
    to_csv(AGGREGATE_HEADER, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn tiny_sweep() -> BenchSweep {
        serde_json::from_value(json!({
            "generators": [{"kind": "erdos-renyi", "vertices": 8, "edges": 12}],
            "seeds": [1, 2],
            "configs": [
                {"name": "annealed", "problem": "maxcut", "overrides": {"train": {"epochs": 100, "restarts": 2}}},
                {"name": "plain", "problem": "maxcut", "overrides": {"train": {"epochs": 100, "restarts": 2, "anneal": null}}}
            ]
        }))
        .unwrap()
    }

    #[test]
    fn empty_sweep_gives_header_only() {
        let report = run_sweep(&BenchSweep::default(), false).unwrap();
        assert!(report.runs.is_empty() && report.aggregates.is_empty());
        assert_eq!(runs_csv(&report.runs).unwrap(), RUNS_HEADER.join(",") + "\n");
        assert_eq!(
            aggregates_csv(&report.aggregates).unwrap(),
            AGGREGATE_HEADER.join(",") + "\n"
        );
    }

    #[test]
    fn sweep_is_deterministic_and_ordered() {
        let sweep = tiny_sweep();
        let a = run_sweep(&sweep, false).unwrap();
        let b = run_sweep(&sweep, false).unwrap();
        assert_eq!(runs_csv(&a.runs).unwrap(), runs_csv(&b.runs).unwrap());
        assert_eq!(a.runs.len(), 4);
        assert_eq!(a.aggregates.len(), 2);
        let order: Vec<(&str, u64)> = a.runs.iter().map(|r| (r.config.as_str(), r.seed)).collect();
        assert_eq!(order, [("annealed", 1), ("annealed", 2), ("plain", 1), ("plain", 2)]);
        assert!(a
            .runs
            .iter()
            .all(|r| r.time_seconds.is_none() && r.generator == "er-8-12"));
        let agg = &a.aggregates[0];
        let objs: Vec<f64> = a.runs[..2].iter().map(|r| r.objective).collect();
        assert_eq!(agg.objective_mean, (objs[0] + objs[1]) / 2.0);
        assert!((agg.objective_stddev - (objs[0] - objs[1]).abs() / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bad_generator_is_reported() {
        let mut sweep = tiny_sweep();
        sweep.generators = vec![GeneratorSpec::ErdosRenyi { vertices: 3, edges: 9 }];
        assert!(matches!(run_sweep(&sweep, false), Err(BenchError::Generate { .. })));
    }

    #[test]
    fn stddev_edge_cases() {
        assert_eq!(stddev(&[3.0]), 0.0);
        assert!((stddev(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-15);
    }
}
