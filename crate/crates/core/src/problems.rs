//! Compiles each supported problem into a [`CompiledLoss`]: PUBO terms plus
//! the balance and color-usage components that are not polynomial in `X`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::hypergraph::{Graph, Hypergraph, HypergraphError};
use crate::model::{Assignment, ModelError, OhPuboInstance};
use crate::oracle;
use crate::tensor::{Tape, Tensor, TensorError, Var};

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_BETA: f64 = 20.0;
pub const DEFAULT_MIS_PENALTY: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Problem {
    #[serde(rename = "graph-coloring")]
    GraphColoring,
    #[serde(rename = "strong-coloring")]
    StrongColoring,
    #[serde(rename = "proper-coloring")]
    ProperColoring,
    #[serde(rename = "graph-partitioning")]
    GraphPartitioning,
    #[serde(rename = "hypergraph-partitioning")]
    HypergraphPartitioning,
    #[serde(rename = "maxcut")]
    MaxCut,
    #[serde(rename = "mis")]
    Mis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    Coloring,
    Partition,
    MaxCut,
    Mis,
}

impl Problem {
    pub const ALL: [Problem; 7] = [
        Problem::GraphColoring,
        Problem::StrongColoring,
        Problem::ProperColoring,
        Problem::GraphPartitioning,
        Problem::HypergraphPartitioning,
        Problem::MaxCut,
        Problem::Mis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Problem::GraphColoring => "graph-coloring",
            Problem::StrongColoring => "strong-coloring",
            Problem::ProperColoring => "proper-coloring",
            Problem::GraphPartitioning => "graph-partitioning",
            Problem::HypergraphPartitioning => "hypergraph-partitioning",
            Problem::MaxCut => "maxcut",
            Problem::Mis => "mis",
        }
    }

    pub fn kind(self) -> ObjectiveKind {
        match self {
            Problem::GraphColoring | Problem::StrongColoring | Problem::ProperColoring => ObjectiveKind::Coloring,
            Problem::GraphPartitioning | Problem::HypergraphPartitioning => ObjectiveKind::Partition,
            Problem::MaxCut => ObjectiveKind::MaxCut,
            Problem::Mis => ObjectiveKind::Mis,
        }
    }

    pub fn requires_graph(self) -> bool {
        matches!(
            self,
            Problem::GraphColoring | Problem::GraphPartitioning | Problem::MaxCut | Problem::Mis
        )
    }

    /// Whether permuting group labels preserves the objective. False only for
    /// MIS, where column 0 means "in the set".
    pub fn is_label_symmetric(self) -> bool {
        self != Problem::Mis
    }

    pub fn uses_color_head(self) -> bool {
        self.kind() == ObjectiveKind::Coloring
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("unknown problem {0:?}")]
pub struct UnknownProblem(pub String);

impl FromStr for Problem {
    type Err = UnknownProblem;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Problem::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| UnknownProblem(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompileError {
    #[error("{problem} needs at least 2 groups, got {k}")]
    TooFewGroups { problem: Problem, k: usize },
    #[error("{problem} always uses exactly 2 groups, got {k}")]
    FixedGroups { problem: Problem, k: usize },
    #[error("{problem} needs a graph: {source}")]
    NotAGraph { problem: Problem, source: HypergraphError },
    #[error("provably infeasible: {0}")]
    Infeasible(String),
    #[error("{name} must be {requirement}, got {value}")]
    BadWeight {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Knobs shared by the problem compilers. `groups` is `K` for partitioning
/// and `K_max` for coloring; `None` picks [`default_groups`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompileOptions {
    pub groups: Option<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub mis_penalty: f64,
    /// Divide the balance deviation by `|V|^2 / K`.
    pub normalize_balance: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            groups: None,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            mis_penalty: DEFAULT_MIS_PENALTY,
            normalize_balance: true,
        }
    }
}

/// Group count used when none is given: max degree + 1 for graph coloring,
/// twice the largest hyperedge for strong coloring, max vertex degree + 1
/// for proper coloring, and 2 otherwise.
pub fn default_groups(problem: Problem, instance: &Hypergraph) -> usize {
    let max_degree = instance.degrees().into_iter().max().unwrap_or(0);
    let k = match problem {
        Problem::GraphColoring | Problem::ProperColoring => max_degree + 1,
        Problem::StrongColoring => 2 * instance.max_edge_size(),
        _ => 2,
    };
    k.max(2)
}

/// A differentiable objective for one problem instance.
///
/// The term component is `weight * (PUBO(X) + constant)`, where the weight
/// is `λ1` for coloring, `α` for partitioning and 1 otherwise. Coloring adds
/// `Σ y_k + λ2 Σ_k |P_k| (1 - y_k)` and partitioning adds
/// `β Σ_k (|P_k| - |V|/K)^2`, with `|P_k|` the column sums of `X`.
#[derive(Debug, Clone)]
pub struct CompiledLoss {
    problem: Problem,
    instance: Hypergraph,
    pubo: OhPuboInstance,
    sparse: Arc<[(Vec<usize>, f64)]>,
    k: usize,
    alpha: f64,
    beta: f64,
    constant: f64,
    column: Option<usize>,
    normalize_balance: bool,
    dense: bool,
    lambda1: f64,
    lambda2: f64,
}

/// The pieces of a relaxed loss, all recorded on the same tape.
#[derive(Clone, Copy)]
pub struct LossParts<'t> {
    pub terms: Var<'t>,
    pub balance: Option<Var<'t>>,
    pub usage: Option<Var<'t>>,
    pub colors: Option<Var<'t>>,
    pub total: Var<'t>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChromaticReport {
    pub colors: usize,
    pub conflicts: usize,
}

fn check_weight(name: &'static str, value: f64, positive: bool) -> Result<(), CompileError> {
    let ok = value.is_finite() && if positive { value > 0.0 } else { value >= 0.0 };
    if ok {
        Ok(())
    } else {
        Err(CompileError::BadWeight {
            name,
            requirement: if positive { "finite and > 0" } else { "finite and >= 0" },
            value,
        })
    }
}

fn as_graph(problem: Problem, instance: &Hypergraph) -> Result<Graph, CompileError> {
    Graph::from_hypergraph(instance.clone()).map_err(|source| CompileError::NotAGraph { problem, source })
}

fn check_groups(problem: Problem, k: usize) -> Result<(), CompileError> {
    if k < 2 {
        return Err(CompileError::TooFewGroups { problem, k });
    }
    Ok(())
}

struct Parts {
    terms: Vec<Vec<usize>>,
    coefficients: Vec<f64>,
    constant: f64,
    column: Option<usize>,
}

impl CompiledLoss {
    fn assemble(
        problem: Problem,
        instance: &Hypergraph,
        k: usize,
        opts: &CompileOptions,
        parts: Parts,
    ) -> Result<Self, CompileError> {
        check_weight("alpha", opts.alpha, false)?;
        check_weight("beta", opts.beta, false)?;
        let terms = Hypergraph::new(instance.num_vertices(), parts.terms).map_err(ModelError::from)?;
        let pubo = OhPuboInstance::new(terms, parts.coefficients)?;
        Ok(CompiledLoss {
            problem,
            instance: instance.clone(),
            sparse: pubo.sparse_terms(),
            pubo,
            k,
            alpha: opts.alpha,
            beta: opts.beta,
            constant: parts.constant,
            column: parts.column,
            normalize_balance: opts.normalize_balance,
            dense: false,
            lambda1: 0.0,
            lambda2: 0.0,
        })
    }

    pub fn problem(&self) -> Problem {
        self.problem
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.problem.kind()
    }

    pub fn instance(&self) -> &Hypergraph {
        &self.instance
    }

    pub fn pubo(&self) -> &OhPuboInstance {
        &self.pubo
    }

    /// Constant added to the PUBO value to obtain the problem's term.
    pub fn term_constant(&self) -> f64 {
        self.constant
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn uses_color_head(&self) -> bool {
        self.problem.uses_color_head()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn set_penalties(&mut self, lambda1: f64, lambda2: f64) -> Result<(), CompileError> {
        check_weight("lambda1", lambda1, false)?;
        check_weight("lambda2", lambda2, false)?;
        self.lambda1 = lambda1;
        self.lambda2 = lambda2;
        Ok(())
    }

    /// Evaluate terms with the dense matrix forms instead of the sparse
    /// term sum. Same values, `O(k |V| |E|)` per pass.
    pub fn with_dense_terms(mut self, dense: bool) -> Self {
        self.dense = dense;
        self
    }

    /// Multiplier on the term component.
    pub fn term_weight(&self) -> f64 {
        match self.kind() {
            ObjectiveKind::Coloring => self.lambda1,
            ObjectiveKind::Partition => self.alpha,
            ObjectiveKind::MaxCut | ObjectiveKind::Mis => 1.0,
        }
    }

    /// Unweighted term value of a single violation or cut, when the term
    /// counts one: 1 per conflict, 2 per cut edge in graph partitioning,
    /// 1 per cut hyperedge, -2 per max-cut edge.
    pub fn term_unit(&self) -> Option<f64> {
        match self.problem {
            Problem::GraphColoring | Problem::StrongColoring | Problem::ProperColoring => Some(1.0),
            Problem::GraphPartitioning => Some(2.0),
            Problem::HypergraphPartitioning => Some(1.0),
            Problem::MaxCut => Some(-2.0),
            Problem::Mis => None,
        }
    }

    fn term_input<'t>(&self, x: Var<'t>) -> Result<Var<'t>, TensorError> {
        match self.column {
            Some(c) => x.select_column(c),
            None => Ok(x),
        }
    }

    /// Unweighted term value `PUBO(X) + constant` on the tape.
    pub fn relaxed_terms<'t>(&self, x: Var<'t>) -> Result<Var<'t>, TensorError> {
        let input = self.term_input(x)?;
        let value = if !self.dense {
            input.term_sum(&self.sparse)?
        } else if let Some(q) = self.pubo.to_qubo() {
            q.on_tape(x.tape()).split(input)?
        } else {
            self.pubo.on_tape(x.tape()).value(input)?
        };
        value.add_scalar(self.constant)
    }

    /// Records the full problem loss (without the Gini penalty) for relaxed
    /// `X` and, for coloring, the `1 x k` usage head `y`.
    pub fn relaxed<'t>(&self, x: Var<'t>, y: Option<Var<'t>>) -> Result<LossParts<'t>, TensorError> {
        let n = self.instance.num_vertices();
        x.expect_shape((n, self.k), "loss input")?;
        let terms = self.relaxed_terms(x)?.scale(self.term_weight())?;
        let mut total = terms;
        let mut parts = LossParts {
            terms,
            balance: None,
            usage: None,
            colors: None,
            total,
        };
        match self.kind() {
            ObjectiveKind::Partition => {
                let dev = x.column_sum()?.add_scalar(-(n as f64) / self.k as f64)?;
                let balance = dev.mul(dev)?.sum()?.scale(self.beta / self.balance_norm())?;
                total = total.add(balance)?;
                parts.balance = Some(balance);
            }
            ObjectiveKind::Coloring => {
                if let Some(y) = y {
                    y.expect_shape((1, self.k), "color head")?;
                    let unused = y.scale(-1.0)?.add_scalar(1.0)?;
                    let usage = x.column_sum()?.mul(unused)?.sum()?.scale(self.lambda2)?;
                    let colors = y.sum()?;
                    total = total.add(usage)?.add(colors)?;
                    parts.usage = Some(usage);
                    parts.colors = Some(colors);
                }
            }
            ObjectiveKind::MaxCut | ObjectiveKind::Mis => {}
        }
        parts.total = total;
        Ok(parts)
    }

    fn balance_norm(&self) -> f64 {
        let n = self.instance.num_vertices() as f64;
        if self.normalize_balance && n > 0.0 {
            n * n / self.k as f64
        } else {
            1.0
        }
    }

    fn check_assignment(&self, a: &Assignment) -> Result<(), ModelError> {
        if a.num_vertices() != self.instance.num_vertices() {
            return Err(ModelError::DimensionMismatch {
                instance: self.instance.num_vertices(),
                assignment: a.num_vertices(),
            });
        }
        if a.k() != self.k {
            return Err(ModelError::GroupOutOfRange {
                vertex: 0,
                group: a.k(),
                k: self.k,
            });
        }
        Ok(())
    }

    /// Unweighted term value on an assignment, through the dense matrix form.
    pub fn term_value(&self, a: &Assignment) -> Result<f64, ModelError> {
        self.check_assignment(a)?;
        let tape = Tape::new();
        let input = self.term_input(tape.constant(a.matrix().clone()))?;
        Ok(self.pubo.on_tape(&tape).value(input)?.item() + self.constant)
    }

    /// Weighted term component, `term_weight() * term_value(a)`.
    pub fn term_component(&self, a: &Assignment) -> Result<f64, ModelError> {
        Ok(self.term_weight() * self.term_value(a)?)
    }

    /// `β Σ_k (|P_k| - |V|/K)^2`, normalized like the relaxed loss.
    pub fn balance_component(&self, x: &Tensor) -> f64 {
        let target = self.instance.num_vertices() as f64 / self.k as f64;
        let dev: f64 = x.column_sums().data().iter().map(|s| (s - target).powi(2)).sum();
        self.beta * dev / self.balance_norm()
    }

    /// `λ2 Σ_k |P_k| (1 - y_k)`.
    pub fn usage_component(&self, x: &Tensor, y: &[f64]) -> f64 {
        let sums = x.column_sums();
        self.lambda2 * sums.data().iter().zip(y).map(|(s, y)| s * (1.0 - y)).sum::<f64>()
    }

    /// Score minimized among hard assignments with equal violation counts:
    /// colors used, weighted cut plus balance, `-2 * cut`, or `-|S|`.
    /// Computed by direct counting so it is cheap enough for enumeration.
    pub fn hard_score_from_groups(&self, groups: &[usize]) -> f64 {
        match self.problem.kind() {
            ObjectiveKind::Coloring => {
                let sizes = oracle::group_sizes(groups, self.k);
                sizes.iter().filter(|&&s| s > 0).count() as f64
            }
            ObjectiveKind::Partition => {
                let unit = self.term_unit().unwrap_or(1.0);
                let cut = oracle::cut_count(&self.instance, groups) as f64;
                let target = self.instance.num_vertices() as f64 / self.k as f64;
                let dev: f64 = oracle::group_sizes(groups, self.k)
                    .iter()
                    .map(|&s| (s as f64 - target).powi(2))
                    .sum();
                self.alpha * unit * cut + self.beta * dev / self.balance_norm()
            }
            ObjectiveKind::MaxCut => -2.0 * oracle::cut_count(&self.instance, groups) as f64,
            ObjectiveKind::Mis => -(groups.iter().filter(|&&g| g == 0).count() as f64),
        }
    }

    /// Colors used (nonempty columns) and conflicts counted the verifier's way.
    pub fn chromatic_report(&self, a: &Assignment) -> Result<ChromaticReport, ModelError> {
        self.check_assignment(a)?;
        let groups = a.groups()?;
        let colors = oracle::group_sizes(&groups, self.k).iter().filter(|&&s| s > 0).count();
        let conflicts = oracle::count_violations(self.problem, &self.instance, &groups);
        Ok(ChromaticReport { colors, conflicts })
    }
}

/// Compiles `problem` on `instance` with the given options.
pub fn compile(problem: Problem, instance: &Hypergraph, opts: &CompileOptions) -> Result<CompiledLoss, CompileError> {
    let k = opts.groups.unwrap_or_else(|| default_groups(problem, instance));
    match problem {
        Problem::GraphColoring => compile_graph_coloring(&as_graph(problem, instance)?, k),
        Problem::StrongColoring => compile_strong_coloring(instance, k),
        Problem::ProperColoring => compile_proper_coloring(instance, k),
        Problem::GraphPartitioning => compile_graph_partitioning(&as_graph(problem, instance)?, k, opts),
        Problem::HypergraphPartitioning => compile_hypergraph_partitioning(instance, k, opts),
        Problem::MaxCut | Problem::Mis => {
            if k != 2 {
                return Err(CompileError::FixedGroups { problem, k });
            }
            let g = as_graph(problem, instance)?;
            if problem == Problem::MaxCut {
                compile_maxcut(&g)
            } else {
                compile_mis(&g, opts.mis_penalty)
            }
        }
    }
}

fn coloring(
    problem: Problem,
    instance: &Hypergraph,
    k: usize,
    terms: Vec<Vec<usize>>,
    coefficients: Vec<f64>,
) -> Result<CompiledLoss, CompileError> {
    check_groups(problem, k)?;
    let parts = Parts {
        terms,
        coefficients,
        constant: 0.0,
        column: None,
    };
    CompiledLoss::assemble(problem, instance, k, &CompileOptions::default(), parts)
}

/// One unit pair term per edge.
pub fn compile_graph_coloring(g: &Graph, k_max: usize) -> Result<CompiledLoss, CompileError> {
    let terms: Vec<Vec<usize>> = g.edges().to_vec();
    let coefficients = vec![1.0; terms.len()];
    coloring(Problem::GraphColoring, g, k_max, terms, coefficients)
}

/// One pair term per vertex pair sharing a hyperedge; the coefficient is the
/// number of hyperedges containing the pair.
pub fn compile_strong_coloring(h: &Hypergraph, k_max: usize) -> Result<CompiledLoss, CompileError> {
    check_groups(Problem::StrongColoring, k_max)?;
    if k_max < h.max_edge_size() {
        return Err(CompileError::Infeasible(format!(
            "a hyperedge of size {} cannot get distinct colors from {k_max}",
            h.max_edge_size()
        )));
    }
    let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for e in h.edges() {
        for (a, &u) in e.iter().enumerate() {
            for &v in &e[a + 1..] {
                *pairs.entry((u, v)).or_default() += 1.0;
            }
        }
    }
    let (terms, coefficients) = pairs.into_iter().map(|((u, v), c)| (vec![u, v], c)).unzip();
    coloring(Problem::StrongColoring, h, k_max, terms, coefficients)
}

/// One unit term per hyperedge, penalizing monochromatic hyperedges.
pub fn compile_proper_coloring(h: &Hypergraph, k_max: usize) -> Result<CompiledLoss, CompileError> {
    if let Some(j) = h.edges().iter().position(|e| e.len() < 2) {
        return Err(CompileError::Infeasible(format!(
            "hyperedge {j} has a single vertex and is always monochromatic"
        )));
    }
    coloring(
        Problem::ProperColoring,
        h,
        k_max,
        h.edges().to_vec(),
        vec![1.0; h.num_edges()],
    )
}

/// Cut term `Σ_(i,j) sum(x_i + x_j - 2 x_i ⊙ x_j)`: pair coefficient -2 and
/// constant 2 per edge, since relaxed rows sum to 1.
pub fn compile_graph_partitioning(g: &Graph, k: usize, opts: &CompileOptions) -> Result<CompiledLoss, CompileError> {
    check_groups(Problem::GraphPartitioning, k)?;
    let parts = Parts {
        terms: g.edges().to_vec(),
        coefficients: vec![-2.0; g.num_edges()],
        constant: 2.0 * g.num_edges() as f64,
        column: None,
    };
    CompiledLoss::assemble(Problem::GraphPartitioning, g, k, opts, parts)
}

/// Per hyperedge `(1/|e|) sum(Σ_i x_i - |e| ⊙_i x_i)`, which for
/// row-stochastic rows is `1 - sum(⊙_i x_i)`: coefficient -1, constant 1.
pub fn compile_hypergraph_partitioning(
    h: &Hypergraph,
    k: usize,
    opts: &CompileOptions,
) -> Result<CompiledLoss, CompileError> {
    check_groups(Problem::HypergraphPartitioning, k)?;
    let parts = Parts {
        terms: h.edges().to_vec(),
        coefficients: vec![-1.0; h.num_edges()],
        constant: h.num_edges() as f64,
        column: None,
    };
    CompiledLoss::assemble(Problem::HypergraphPartitioning, h, k, opts, parts)
}

/// `Σ_(i,j) (2 x_i·x_j - x_i·x_i - x_j·x_j)` in one-hot form: pair
/// coefficient 2 and a linear `-deg(i)` per vertex, so a cut edge scores -2
/// and an uncut one 0.
pub fn compile_maxcut(g: &Graph) -> Result<CompiledLoss, CompileError> {
    let mut terms: Vec<Vec<usize>> = Vec::new();
    let mut coefficients = Vec::new();
    for (v, d) in g.degrees().into_iter().enumerate() {
        if d > 0 {
            terms.push(vec![v]);
            coefficients.push(-(d as f64));
        }
    }
    for e in g.edges() {
        terms.push(e.clone());
        coefficients.push(2.0);
    }
    let parts = Parts {
        terms,
        coefficients,
        constant: 0.0,
        column: None,
    };
    CompiledLoss::assemble(Problem::MaxCut, g, 2, &CompileOptions::default(), parts)
}

/// `-Σ_i x_i0 + P Σ_(i,j) x_i0 x_j0` on column 0 ("in the set") of a
/// two-group assignment.
pub fn compile_mis(g: &Graph, penalty: f64) -> Result<CompiledLoss, CompileError> {
    check_weight("MIS penalty", penalty, true)?;
    let n = g.num_vertices();
    let mut terms: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    let mut coefficients = vec![-1.0; n];
    for e in g.edges() {
        terms.push(e.clone());
        coefficients.push(penalty);
    }
    let parts = Parts {
        terms,
        coefficients,
        constant: 0.0,
        column: Some(0),
    };
    CompiledLoss::assemble(Problem::Mis, g, 2, &CompileOptions::default(), parts)
}
