//! Run configuration and the serialized result of a solve.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::hypergraph::Hypergraph;
use crate::hypergraph::{parse_edgelist, parse_hgr, ParseError};
use crate::oracle::VerifyReport;
use crate::problems::{compile, CompileError, CompileOptions, Problem};
use crate::trainer::{train, Backend, RestartSummary, TraceRow, TrainConfig, TrainError};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    Hgr,
    Edgelist,
}

impl InputFormat {
    /// `.hgr` files are hMETIS, everything else an edge list.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("hgr") => InputFormat::Hgr,
            _ => InputFormat::Edgelist,
        }
    }

    pub fn parse(self, text: &str) -> Result<Hypergraph, ParseError> {
        match self {
            InputFormat::Hgr => parse_hgr(text),
            InputFormat::Edgelist => parse_edgelist(text).map(|g| g.into_hypergraph()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: Problem,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<InputFormat>,
    #[serde(default)]
    pub compile: CompileOptions,
    pub train: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("invalid config: {0}")]
    Config(#[from] serde_json::Error),
}

/// Recursively overlays `overlay` onto `base`. Objects merge key by key;
/// anything else (including `null`) replaces.
pub fn merge_json(base: &mut Value, overlay: &Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge_json(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

impl RunConfig {
    /// Defaults for `problem`, see [`TrainConfig::for_problem`].
    pub fn new(problem: Problem, backend: Backend) -> Self {
        RunConfig {
            problem,
            input: None,
            format: None,
            compile: CompileOptions::default(),
            train: TrainConfig::for_problem(problem, backend),
            output: None,
            trace: None,
        }
    }

    /// A config for `problem` with a partial JSON object layered over the
    /// problem's defaults; `null` means no overrides. The backend named in the overlay, if any, picks
    /// the default learning rate.
    pub fn with_overrides(problem: Problem, overlay: &Value) -> Result<Self, serde_json::Error> {
        let backend = overlay
            .pointer("/train/encoder/backend")
            .map(|b| serde_json::from_value::<Backend>(b.clone()))
            .transpose()?
            .unwrap_or_default();
        let mut value = serde_json::to_value(RunConfig::new(problem, backend))?;
        if !overlay.is_null() {
            merge_json(&mut value, overlay);
        }
        serde_json::from_value(value)
    }
}

/// The metric block of a result: exactly what [`crate::oracle::verify`]
/// reports for the stored assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub violated_terms: usize,
    pub colors: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set_size: Option<usize>,
    pub group_sizes: Vec<usize>,
    pub b1: f64,
    pub b2: f64,
}

impl From<&VerifyReport> for Metrics {
    fn from(r: &VerifyReport) -> Self {
        Metrics {
            violated_terms: r.violated_terms,
            colors: r.colors_used,
            cut: r.cut,
            set_size: r.set_size,
            group_sizes: r.group_sizes.clone(),
            b1: r.b1,
            b2: r.b2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub schema: u32,
    pub version: String,
    pub problem: Problem,
    pub k: usize,
    pub assignment: Vec<usize>,
    pub objective: f64,
    pub feasible: bool,
    pub metrics: Metrics,
    /// First snapshot epoch at which the winning restart was feasible.
    pub epochs_to_first_feasible: Option<usize>,
    pub best_epoch: usize,
    pub best_restart: usize,
    pub wall_time_seconds: f64,
    pub seed: u64,
    pub restarts: Vec<RestartSummary>,
    pub config: RunConfig,
}

/// A finished solve plus the winning restart's trace.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub result: SolveResult,
    pub trace: Vec<TraceRow>,
}

/// Compiles and trains `config` on `instance`.
pub fn solve(config: &RunConfig, instance: &Hypergraph) -> Result<SolveOutcome, RunError> {
    let start = Instant::now();
    let loss = compile(config.problem, instance, &config.compile)?;
    let outcome = train(&loss, &config.train)?;
    let mut echo = config.clone();
    echo.compile.groups = Some(loss.k());
    let result = SolveResult {
        schema: SCHEMA_VERSION,
        version: TOOL_VERSION.to_string(),
        problem: config.problem,
        k: loss.k(),
        assignment: outcome.groups,
        objective: outcome.report.objective,
        feasible: outcome.report.feasible,
        metrics: Metrics::from(&outcome.report),
        epochs_to_first_feasible: outcome.epochs_to_first_feasible,
        best_epoch: outcome.epoch,
        best_restart: outcome.restart,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        seed: config.train.seed,
        restarts: outcome.restarts,
        config: echo,
    };
    Ok(SolveOutcome {
        result,
        trace: outcome.trace,
    })
}
