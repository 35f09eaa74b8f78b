//! One-hot encoded QUBO and PUBO cost models.
//!
//! Each vertex carries a `k`-dimensional one-hot (or, once relaxed,
//! row-stochastic) group vector. A quadratic term `Q_ij` contributes
//! `Q_ij * sum(x_i ⊙ x_j)`, which on one-hot rows is `Q_ij` exactly when `i`
//! and `j` share a group. Polynomial terms generalize this to the Hadamard
//! product over any vertex set, so a PUBO instance is a hypergraph plus one
//! coefficient per hyperedge.
//!
//! Every cost has two evaluators: a naive term-by-term loop and a matrix form
//! built on the autodiff [`Tape`]. The matrix forms are what training
//! differentiates; the naive loops exist to check them.

use std::sync::Arc;

use crate::hypergraph::{Hypergraph, HypergraphError};
use crate::tensor::{Tape, Tensor, TensorError, Var};

const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("instance has {instance} vertices but the assignment has {assignment} rows")]
    DimensionMismatch { instance: usize, assignment: usize },
    #[error("expected {expected} coefficients, got {got}")]
    CoefficientCount { expected: usize, got: usize },
    #[error("coefficient {index} is not finite")]
    NonFiniteCoefficient { index: usize },
    #[error("QUBO matrix must be square, got {0:?}")]
    NotSquare((usize, usize)),
    #[error("QUBO term ({i}, {j}) is outside a {n}-vertex instance")]
    TermOutOfRange { i: usize, j: usize, n: usize },
    #[error("row {row} is not one-hot")]
    NotOneHot { row: usize },
    #[error("row {row} is not a probability vector")]
    NotStochastic { row: usize },
    #[error("vertex {vertex} assigned to group {group}, but k = {k}")]
    GroupOutOfRange { vertex: usize, group: usize, k: usize },
    #[error("a hard assignment is required")]
    NotHard,
    #[error("group count must be at least 1")]
    NoGroups,
    #[error(transparent)]
    Hypergraph(#[from] HypergraphError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignmentMode {
    /// Every row is exactly one-hot.
    Hard,
    /// Every row is a probability vector.
    Relaxed,
}

/// A `|V| x k` group-assignment matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    x: Tensor,
    mode: AssignmentMode,
}

impl Assignment {
    /// One-hot rows from a group index per vertex.
    pub fn hard(groups: &[usize], k: usize) -> Result<Self, ModelError> {
        if k == 0 {
            return Err(ModelError::NoGroups);
        }
        let mut x = Tensor::zeros(groups.len(), k);
        for (vertex, &group) in groups.iter().enumerate() {
            if group >= k {
                return Err(ModelError::GroupOutOfRange { vertex, group, k });
            }
            x.set(vertex, group, 1.0);
        }
        Ok(Assignment {
            x,
            mode: AssignmentMode::Hard,
        })
    }

    /// Wraps a matrix whose rows must each be exactly one-hot.
    pub fn from_one_hot(x: Tensor) -> Result<Self, ModelError> {
        for row in 0..x.rows() {
            let r = x.row(row);
            let ones = r.iter().filter(|&&v| v == 1.0).count();
            let zeros = r.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != r.len() {
                return Err(ModelError::NotOneHot { row });
            }
        }
        Ok(Assignment {
            x,
            mode: AssignmentMode::Hard,
        })
    }

    /// Wraps a row-stochastic matrix (entries in `[0, 1]`, rows summing to 1).
    pub fn relaxed(x: Tensor) -> Result<Self, ModelError> {
        if x.cols() == 0 {
            return Err(ModelError::NoGroups);
        }
        for row in 0..x.rows() {
            let r = x.row(row);
            let total: f64 = r.iter().sum();
            let in_range = r.iter().all(|v| (0.0..=1.0).contains(v));
            if !in_range || (total - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(ModelError::NotStochastic { row });
            }
        }
        Ok(Assignment {
            x,
            mode: AssignmentMode::Relaxed,
        })
    }

    pub fn matrix(&self) -> &Tensor {
        &self.x
    }

    pub fn mode(&self) -> AssignmentMode {
        self.mode
    }

    pub fn is_hard(&self) -> bool {
        self.mode == AssignmentMode::Hard
    }

    pub fn num_vertices(&self) -> usize {
        self.x.rows()
    }

    pub fn k(&self) -> usize {
        self.x.cols()
    }

    /// Per-row argmax, ties to the lowest column.
    pub fn argmax_groups(&self) -> Vec<usize> {
        (0..self.x.rows()).map(|r| argmax(self.x.row(r))).collect()
    }

    /// Group index per vertex; only defined for hard assignments.
    pub fn groups(&self) -> Result<Vec<usize>, ModelError> {
        match self.mode {
            AssignmentMode::Hard => Ok(self.argmax_groups()),
            AssignmentMode::Relaxed => Err(ModelError::NotHard),
        }
    }

    /// Projects each row onto the one-hot vector of its largest entry.
    pub fn harden(&self) -> Assignment {
        Assignment::hard(&self.argmax_groups(), self.k()).expect("argmax is in range")
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// OH-QUBO instance stored as an upper-triangular `n x n` matrix whose
/// diagonal holds the linear coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct OhQuboInstance {
    q: Tensor,
}

impl OhQuboInstance {
    /// Accumulates `(i, j, value)` terms; entries with `i > j` fold onto `(j, i)`.
    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self, ModelError> {
        let mut q = Tensor::zeros(n, n);
        for (index, (i, j, value)) in terms.into_iter().enumerate() {
            if i >= n || j >= n {
                return Err(ModelError::TermOutOfRange { i, j, n });
            }
            if !value.is_finite() {
                return Err(ModelError::NonFiniteCoefficient { index });
            }
            let (a, b) = (i.min(j), i.max(j));
            q.set(a, b, q.get(a, b) + value);
        }
        Ok(OhQuboInstance { q })
    }

    /// Folds a full (e.g. symmetric) matrix into upper-triangular storage:
    /// `Q'_ij = Q_ij + Q_ji` for `i < j`.
    pub fn from_matrix(m: &Tensor) -> Result<Self, ModelError> {
        if m.rows() != m.cols() {
            return Err(ModelError::NotSquare(m.shape()));
        }
        let n = m.rows();
        let terms = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, m.get(i, j)));
        Self::from_terms(n, terms)
    }

    pub fn n(&self) -> usize {
        self.q.rows()
    }

    pub fn matrix(&self) -> &Tensor {
        &self.q
    }

    /// Coefficient of the `(i, j)` term, `i <= j`.
    pub fn coefficient(&self, i: usize, j: usize) -> f64 {
        self.q.get(i.min(j), i.max(j))
    }

    /// Diagonal as a `1 x n` row.
    pub fn diagonal(&self) -> Tensor {
        Tensor::row_vector((0..self.n()).map(|i| self.q.get(i, i)).collect())
    }

    /// `Q - diag(Q)`.
    pub fn off_diagonal(&self) -> Tensor {
        let mut off = self.q.clone();
        for i in 0..self.n() {
            off.set(i, i, 0.0);
        }
        off
    }

    /// Loads the constant matrices onto a tape for repeated evaluation.
    pub fn on_tape<'t>(&self, tape: &'t Tape) -> QuboOnTape<'t> {
        QuboOnTape {
            q: tape.constant(self.q.clone()),
            diagonal: tape.constant(self.diagonal()),
            off_diagonal: tape.constant(self.off_diagonal()),
        }
    }
}

/// Tape-resident constants of an [`OhQuboInstance`].
#[derive(Debug, Clone, Copy)]
pub struct QuboOnTape<'t> {
    q: Var<'t>,
    diagonal: Var<'t>,
    off_diagonal: Var<'t>,
}

impl<'t> QuboOnTape<'t> {
    /// `sum(Xᵀ Q ⊙ Xᵀ)`. Only correct for one-hot rows, where `x ⊙ x = x`.
    pub fn unsplit(&self, x: Var<'t>) -> Result<Var<'t>, TensorError> {
        let xt = x.transpose()?;
        xt.matmul(self.q)?.mul(xt)?.sum()
    }

    /// `sum(Xᵀ diag(Q)) + sum(Xᵀ (Q - diag(Q)) ⊙ Xᵀ)`: the linear terms are
    /// kept linear, which is what relaxed rows need.
    pub fn split(&self, x: Var<'t>) -> Result<Var<'t>, TensorError> {
        let xt = x.transpose()?;
        let linear = xt.mul(self.diagonal)?.sum()?;
        let quadratic = xt.matmul(self.off_diagonal)?.mul(xt)?.sum()?;
        linear.add(quadratic)
    }
}

fn check_rows(instance: usize, a: &Assignment) -> Result<(), ModelError> {
    if instance != a.num_vertices() {
        return Err(ModelError::DimensionMismatch {
            instance,
            assignment: a.num_vertices(),
        });
    }
    Ok(())
}

fn row_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Term-by-term OH-QUBO cost: `sum_{i<j} Q_ij sum(x_i ⊙ x_j) + sum_i Q_ii sum(x_i)`.
pub fn eval_qubo_naive(inst: &OhQuboInstance, a: &Assignment) -> Result<f64, ModelError> {
    check_rows(inst.n(), a)?;
    let x = a.matrix();
    let mut total = 0.0;
    for i in 0..inst.n() {
        let xi = x.row(i);
        total += inst.q.get(i, i) * xi.iter().sum::<f64>();
        for j in i + 1..inst.n() {
            let q = inst.q.get(i, j);
            if q != 0.0 {
                total += q * row_dot(xi, x.row(j));
            }
        }
    }
    Ok(total)
}

/// Matrix-form OH-QUBO cost: the unsplit product for hard assignments and
/// the linear/quadratic split for relaxed ones.
pub fn eval_qubo_vectorized(inst: &OhQuboInstance, a: &Assignment) -> Result<f64, ModelError> {
    check_rows(inst.n(), a)?;
    let tape = Tape::new();
    let terms = inst.on_tape(&tape);
    let x = tape.constant(a.matrix().clone());
    let value = match a.mode() {
        AssignmentMode::Hard => terms.unsplit(x)?,
        AssignmentMode::Relaxed => terms.split(x)?,
    };
    Ok(value.item())
}

/// `sum(Xᵀ Q ⊙ Xᵀ)` on an arbitrary matrix. Exposed to show how it departs
/// from the true cost once rows stop being one-hot.
pub fn unsplit_quadratic_form(q: &Tensor, x: &Tensor) -> Result<f64, ModelError> {
    let tape = Tape::new();
    let qv = tape.constant(q.clone());
    let xt = tape.constant(x.transpose());
    Ok(xt.matmul(qv)?.mul(xt)?.sum()?.item())
}

/// OH-PUBO instance: hyperedge `j` of `terms` is the vertex set of the `j`-th
/// polynomial term and `coefficients[j]` its weight.
#[derive(Debug, Clone, PartialEq)]
pub struct OhPuboInstance {
    terms: Hypergraph,
    coefficients: Vec<f64>,
}

impl OhPuboInstance {
    pub fn new(terms: Hypergraph, coefficients: Vec<f64>) -> Result<Self, ModelError> {
        if coefficients.len() != terms.num_edges() {
            return Err(ModelError::CoefficientCount {
                expected: terms.num_edges(),
                got: coefficients.len(),
            });
        }
        if let Some(index) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(ModelError::NonFiniteCoefficient { index });
        }
        Ok(OhPuboInstance { terms, coefficients })
    }

    /// Unit coefficient on every hyperedge.
    pub fn unit(terms: Hypergraph) -> Self {
        let coefficients = vec![1.0; terms.num_edges()];
        OhPuboInstance { terms, coefficients }
    }

    pub fn num_vertices(&self) -> usize {
        self.terms.num_vertices()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.num_edges()
    }

    pub fn terms(&self) -> &Hypergraph {
        &self.terms
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn max_order(&self) -> usize {
        self.terms.max_edge_size()
    }

    /// The equivalent OH-QUBO instance when every term has at most two vertices.
    pub fn to_qubo(&self) -> Option<OhQuboInstance> {
        if self.max_order() > 2 {
            return None;
        }
        let terms = self
            .terms
            .edges()
            .iter()
            .zip(&self.coefficients)
            .map(|(e, &c)| match e.as_slice() {
                [i] => (*i, *i, c),
                [i, j] => (*i, *j, c),
                _ => unreachable!("order checked above"),
            });
        Some(OhQuboInstance::from_terms(self.num_vertices(), terms).expect("terms come from a valid hypergraph"))
    }

    /// Terms in the sparse form consumed by [`Var::term_sum`].
    pub fn sparse_terms(&self) -> Arc<[(Vec<usize>, f64)]> {
        self.terms
            .edges()
            .iter()
            .cloned()
            .zip(self.coefficients.iter().copied())
            .collect()
    }

    pub fn on_tape<'t>(&self, tape: &'t Tape) -> PuboOnTape<'t> {
        let h = self.terms.incidence_matrix();
        let fill = h.map(|v| 1.0 - v);
        PuboOnTape {
            incidence: tape.constant(h),
            fill: tape.constant(fill),
            coefficients: tape.constant(Tensor::row_vector(self.coefficients.clone())),
            empty: self.num_vertices() == 0 || self.num_terms() == 0,
        }
    }
}

/// Tape-resident constants of an [`OhPuboInstance`].
#[derive(Debug, Clone, Copy)]
pub struct PuboOnTape<'t> {
    incidence: Var<'t>,
    fill: Var<'t>,
    coefficients: Var<'t>,
    empty: bool,
}

impl<'t> PuboOnTape<'t> {
    /// `sum(Q ⊙ ColM(X ⊙ H + (1 - H)))`, realized one group column at a time:
    /// for column `c`, each incidence column is filled with that group's
    /// entries where the vertex belongs to the term and with 1 elsewhere, then
    /// multiplied down.
    pub fn value(&self, x: Var<'t>) -> Result<Var<'t>, TensorError> {
        let tape = x.tape();
        if self.empty {
            return Ok(tape.constant(Tensor::scalar(0.0)));
        }
        let (rows, k) = x.shape();
        self.incidence.expect_shape((rows, self.incidence.shape().1), "pubo")?;
        let mut per_term: Option<Var<'t>> = None;
        for c in 0..k {
            let slice = x.select_column(c)?.mul(self.incidence)?.add(self.fill)?;
            let products = slice.column_product()?;
            per_term = Some(match per_term {
                Some(acc) => acc.add(products)?,
                None => products,
            });
        }
        match per_term {
            Some(p) => p.mul(self.coefficients)?.sum(),
            None => Ok(tape.constant(Tensor::scalar(0.0))),
        }
    }
}

/// Term-by-term OH-PUBO cost: `sum_j Q_j sum(⊙_{v in e_j} x_v)`.
pub fn eval_pubo_naive(inst: &OhPuboInstance, a: &Assignment) -> Result<f64, ModelError> {
    check_rows(inst.num_vertices(), a)?;
    let x = a.matrix();
    let mut total = 0.0;
    for (e, &q) in inst.terms.edges().iter().zip(&inst.coefficients) {
        let mut term = 0.0;
        for c in 0..a.k() {
            term += e.iter().map(|&v| x.get(v, c)).product::<f64>();
        }
        total += q * term;
    }
    Ok(total)
}

/// Matrix-form OH-PUBO cost. Valid for hard and relaxed rows alike, since a
/// vertex appears at most once in each term.
pub fn eval_pubo_vectorized(inst: &OhPuboInstance, a: &Assignment) -> Result<f64, ModelError> {
    check_rows(inst.num_vertices(), a)?;
    let tape = Tape::new();
    let x = tape.constant(a.matrix().clone());
    Ok(inst.on_tape(&tape).value(x)?.item())
}

/// Rewrites an OH-QUBO instance as OH-PUBO: a singleton term per nonzero
/// diagonal entry and a pair term per nonzero off-diagonal entry, row-major.
pub fn pubo_from_qubo(inst: &OhQuboInstance) -> OhPuboInstance {
    let n = inst.n();
    let mut edges = Vec::new();
    let mut coefficients = Vec::new();
    for i in 0..n {
        for j in i..n {
            let q = inst.q.get(i, j);
            if q != 0.0 {
                edges.push(if i == j { vec![i] } else { vec![i, j] });
                coefficients.push(q);
            }
        }
    }
    let terms = Hypergraph::new(n, edges).expect("QUBO terms are valid hyperedges");
    OhPuboInstance { terms, coefficients }
}
