use std::cell::RefCell;
use std::sync::Arc;

use super::{broadcast_zip, Tensor, TensorError};

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Constant,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    Transpose(usize),
    RowSoftmax(usize),
    ColumnProduct(usize),
    ColumnMax { input: usize, argmax: Vec<usize> },
    ColumnSum(usize),
    Sum(usize),
    Sigmoid(usize),
    Relu(usize),
    SelectColumn(usize, usize),
    TermSum(usize, Arc<[(Vec<usize>, f64)]>),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Records a computation so it can be differentiated in reverse.
///
/// Nodes are append-only, so the recorded graph is acyclic by construction.
/// A tape is meant to be used for one forward/backward pass and then dropped.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.shape())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A trainable input; gradients are reported for leaves.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(Op::Leaf, value, true)
    }

    /// A fixed input that never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(Op::Constant, value, false)
    }

    fn push(&self, op: Op, value: Tensor, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn record(&self, op: Op, value: Tensor, name: &'static str) -> Result<Var<'_>, TensorError> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: name });
        }
        let nodes = self.nodes.borrow();
        let requires_grad = inputs(&op).iter().any(|&i| nodes[i].requires_grad);
        drop(nodes);
        Ok(self.push(op, value, requires_grad))
    }

    fn with_value<R>(&self, id: usize, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.nodes.borrow()[id].value)
    }

    /// Reverse pass from a `1 x 1` loss. Gradients accumulate over every
    /// path reaching a node.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients, TensorError> {
        let nodes = self.nodes.borrow();
        let shape = nodes[loss.id].value.shape();
        if shape != (1, 1) {
            return Err(TensorError::NotScalar(shape));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; nodes.len()];
        grads[loss.id] = Some(Tensor::scalar(1.0));

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            if matches!(node.op, Op::Leaf | Op::Constant) {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            let mut send = |target: usize, contribution: Tensor| {
                if !nodes[target].requires_grad {
                    return;
                }
                match &mut grads[target] {
                    Some(acc) => acc.add_assign(&contribution),
                    slot @ None => *slot = Some(contribution),
                }
            };
            let val = |i: usize| &nodes[i].value;
            match &node.op {
                Op::Leaf | Op::Constant => {}
                Op::MatMul(a, b) => {
                    if nodes[*a].requires_grad {
                        send(*a, g.matmul(&val(*b).transpose())?);
                    }
                    if nodes[*b].requires_grad {
                        send(*b, val(*a).transpose().matmul(&g)?);
                    }
                }
                Op::Add(a, b) => {
                    send(*a, g.reduce_to(val(*a).shape()));
                    send(*b, g.reduce_to(val(*b).shape()));
                }
                Op::Sub(a, b) => {
                    send(*a, g.reduce_to(val(*a).shape()));
                    send(*b, g.map(|v| -v).reduce_to(val(*b).shape()));
                }
                Op::Mul(a, b) => {
                    if nodes[*a].requires_grad {
                        let ga = broadcast_zip("mul", &g, val(*b), |x, y| x * y)?;
                        send(*a, ga.reduce_to(val(*a).shape()));
                    }
                    if nodes[*b].requires_grad {
                        let gb = broadcast_zip("mul", &g, val(*a), |x, y| x * y)?;
                        send(*b, gb.reduce_to(val(*b).shape()));
                    }
                }
                Op::Scale(a, s) => send(*a, g.map(|v| v * s)),
                Op::AddScalar(a) => send(*a, g),
                Op::Transpose(a) => send(*a, g.transpose()),
                Op::RowSoftmax(a) => {
                    let s = &node.value;
                    let mut out = Tensor::zeros(s.rows(), s.cols());
                    for r in 0..s.rows() {
                        let (sr, gr) = (s.row(r), g.row(r));
                        let dot: f64 = sr.iter().zip(gr).map(|(x, y)| x * y).sum();
                        for (o, (x, y)) in out.row_mut(r).iter_mut().zip(sr.iter().zip(gr)) {
                            *o = x * (y - dot);
                        }
                    }
                    send(*a, out);
                }
                Op::ColumnProduct(a) => {
                    let m = val(*a);
                    let (rows, cols) = m.shape();
                    let mut out = Tensor::zeros(rows, cols);
                    let mut prefix = vec![1.0; rows];
                    for c in 0..cols {
                        let mut acc = 1.0;
                        for (r, p) in prefix.iter_mut().enumerate() {
                            *p = acc;
                            acc *= m.get(r, c);
                        }
                        let mut suffix = 1.0;
                        for r in (0..rows).rev() {
                            out.set(r, c, g.get(0, c) * prefix[r] * suffix);
                            suffix *= m.get(r, c);
                        }
                    }
                    send(*a, out);
                }
                Op::ColumnMax { input, argmax } => {
                    let (rows, cols) = val(*input).shape();
                    let mut out = Tensor::zeros(rows, cols);
                    for (c, &r) in argmax.iter().enumerate() {
                        out.set(r, c, g.get(0, c));
                    }
                    send(*input, out);
                }
                Op::ColumnSum(a) => {
                    let rows = val(*a).rows();
                    send(*a, Tensor::from_fn(rows, g.cols(), |_, c| g.get(0, c)));
                }
                Op::Sum(a) => {
                    let (rows, cols) = val(*a).shape();
                    send(*a, Tensor::filled(rows, cols, g.get(0, 0)));
                }
                Op::Sigmoid(a) => {
                    let s = &node.value;
                    let d = broadcast_zip("sigmoid", &g, s, |gv, sv| gv * sv * (1.0 - sv))?;
                    send(*a, d);
                }
                Op::Relu(a) => {
                    let d = broadcast_zip("relu", &g, val(*a), |gv, x| if x > 0.0 { gv } else { 0.0 })?;
                    send(*a, d);
                }
                Op::SelectColumn(a, col) => {
                    let (rows, cols) = val(*a).shape();
                    let mut out = Tensor::zeros(rows, cols);
                    for r in 0..rows {
                        out.set(r, *col, g.get(r, 0));
                    }
                    send(*a, out);
                }
                Op::TermSum(a, terms) => {
                    let x = val(*a);
                    let (rows, k) = x.shape();
                    let scale = g.get(0, 0);
                    let mut out = Tensor::zeros(rows, k);
                    let mut prefix = Vec::new();
                    for (vertices, coefficient) in terms.iter() {
                        let w = scale * coefficient;
                        for c in 0..k {
                            prefix.clear();
                            let mut acc = 1.0;
                            for &v in vertices {
                                prefix.push(acc);
                                acc *= x.get(v, c);
                            }
                            let mut suffix = 1.0;
                            for (&v, p) in vertices.iter().zip(&prefix).rev() {
                                out.set(v, c, out.get(v, c) + w * p * suffix);
                                suffix *= x.get(v, c);
                            }
                        }
                    }
                    send(*a, out);
                }
            }
        }

        let leaves = nodes
            .iter()
            .zip(grads)
            .map(|(n, g)| match n.op {
                Op::Leaf => g,
                _ => None,
            })
            .collect();
        Ok(Gradients { grads: leaves })
    }
}

fn inputs(op: &Op) -> Vec<usize> {
    match op {
        Op::Leaf | Op::Constant => vec![],
        Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![*a, *b],
        Op::Scale(a, _)
        | Op::AddScalar(a)
        | Op::Transpose(a)
        | Op::RowSoftmax(a)
        | Op::ColumnProduct(a)
        | Op::ColumnSum(a)
        | Op::Sum(a)
        | Op::Sigmoid(a)
        | Op::Relu(a)
        | Op::SelectColumn(a, _)
        | Op::TermSum(a, _) => vec![*a],
        Op::ColumnMax { input, .. } => vec![*input],
    }
}

/// Leaf gradients produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `leaf`, or `None` when the loss
    /// does not depend on it.
    pub fn get(&self, leaf: Var<'_>) -> Option<&Tensor> {
        self.grads.get(leaf.id).and_then(Option::as_ref)
    }

    /// Like [`get`](Self::get) but returns zeros for unreached leaves.
    pub fn wrt(&self, leaf: Var<'_>) -> Tensor {
        match self.get(leaf) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = leaf.shape();
                Tensor::zeros(r, c)
            }
        }
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Tensor {
        self.tape.with_value(self.id, Tensor::clone)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.with_value(self.id, Tensor::shape)
    }

    /// Reads a `1 x 1` value.
    pub fn item(&self) -> f64 {
        self.tape.with_value(self.id, |t| t.data()[0])
    }

    fn same_tape(&self, other: &Var<'t>) {
        assert!(std::ptr::eq(self.tape, other.tape), "vars belong to different tapes");
    }

    fn binary(
        &self,
        other: Var<'t>,
        name: &'static str,
        make: fn(usize, usize) -> Op,
        f: fn(f64, f64) -> f64,
    ) -> Result<Var<'t>, TensorError> {
        self.same_tape(&other);
        let value = {
            let nodes = self.tape.nodes.borrow();
            broadcast_zip(name, &nodes[self.id].value, &nodes[other.id].value, f)?
        };
        self.tape.record(make(self.id, other.id), value, name)
    }

    fn unary(
        &self,
        op: Op,
        name: &'static str,
        f: impl FnOnce(&Tensor) -> Result<Tensor, TensorError>,
    ) -> Result<Var<'t>, TensorError> {
        let value = self.tape.with_value(self.id, f)?;
        self.tape.record(op, value, name)
    }

    pub fn matmul(&self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.same_tape(&other);
        let value = {
            let nodes = self.tape.nodes.borrow();
            nodes[self.id].value.matmul(&nodes[other.id].value)?
        };
        self.tape.record(Op::MatMul(self.id, other.id), value, "matmul")
    }

    /// Elementwise sum with size-1 broadcasting.
    pub fn add(&self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.binary(other, "add", Op::Add, |a, b| a + b)
    }

    pub fn sub(&self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.binary(other, "sub", Op::Sub, |a, b| a - b)
    }

    /// Hadamard product with size-1 broadcasting.
    pub fn mul(&self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.binary(other, "mul", Op::Mul, |a, b| a * b)
    }

    pub fn scale(&self, factor: f64) -> Result<Var<'t>, TensorError> {
        self.unary(Op::Scale(self.id, factor), "scale", |t| Ok(t.map(|v| v * factor)))
    }

    pub fn add_scalar(&self, offset: f64) -> Result<Var<'t>, TensorError> {
        self.unary(Op::AddScalar(self.id), "add_scalar", |t| Ok(t.map(|v| v + offset)))
    }

    pub fn transpose(&self) -> Result<Var<'t>, TensorError> {
        self.unary(Op::Transpose(self.id), "transpose", |t| Ok(t.transpose()))
    }

    /// Softmax of each row, stabilised by subtracting the row maximum.
    pub fn row_softmax(&self) -> Result<Var<'t>, TensorError> {
        self.unary(Op::RowSoftmax(self.id), "row_softmax", |t| {
            if !t.is_finite() {
                return Err(TensorError::NonFinite { op: "row_softmax" });
            }
            let mut out = t.clone();
            for r in 0..out.rows() {
                let row = out.row_mut(r);
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    total += *v;
                }
                for v in row.iter_mut() {
                    *v /= total;
                }
            }
            Ok(out)
        })
    }

    /// Product down each column, giving a `1 x cols` row.
    ///
    /// The reverse pass uses leave-one-out products, so zero entries never
    /// cause a division.
    pub fn column_product(&self) -> Result<Var<'t>, TensorError> {
        self.unary(Op::ColumnProduct(self.id), "column_product", |t| {
            if t.rows() == 0 {
                return Err(TensorError::Empty { op: "column_product" });
            }
            let mut out = vec![1.0; t.cols()];
            for r in 0..t.rows() {
                for (o, v) in out.iter_mut().zip(t.row(r)) {
                    *o *= v;
                }
            }
            Ok(Tensor::row_vector(out))
        })
    }

    /// Maximum down each column (`1 x cols`). The subgradient goes to the
    /// lowest row index attaining the maximum.
    pub fn column_max(&self) -> Result<Var<'t>, TensorError> {
        let (value, argmax) = self.tape.with_value(self.id, |t| {
            if t.rows() == 0 {
                return Err(TensorError::Empty { op: "column_max" });
            }
            let mut best = t.row(0).to_vec();
            let mut argmax = vec![0; t.cols()];
            for r in 1..t.rows() {
                for (c, &v) in t.row(r).iter().enumerate() {
                    if v > best[c] {
                        best[c] = v;
                        argmax[c] = r;
                    }
                }
            }
            Ok((Tensor::row_vector(best), argmax))
        })?;
        self.tape
            .record(Op::ColumnMax { input: self.id, argmax }, value, "column_max")
    }

    pub fn column_sum(&self) -> Result<Var<'t>, TensorError> {
        self.unary(Op::ColumnSum(self.id), "column_sum", |t| Ok(t.column_sums()))
    }

    /// Sum of all entries as a `1 x 1` value.
    pub fn sum(&self) -> Result<Var<'t>, TensorError> {
        self.unary(Op::Sum(self.id), "sum", |t| Ok(Tensor::scalar(t.sum())))
    }

    pub fn sigmoid(&self) -> Result<Var<'t>, TensorError> {
        self.unary(Op::Sigmoid(self.id), "sigmoid", |t| {
            Ok(t.map(|v| {
                if v >= 0.0 {
                    1.0 / (1.0 + (-v).exp())
                } else {
                    let e = v.exp();
                    e / (1.0 + e)
                }
            }))
        })
    }

    pub fn relu(&self) -> Result<Var<'t>, TensorError> {
        self.unary(Op::Relu(self.id), "relu", |t| Ok(t.map(|v| v.max(0.0))))
    }

    /// Column `index` as a `rows x 1` tensor.
    pub fn select_column(&self, index: usize) -> Result<Var<'t>, TensorError> {
        self.unary(Op::SelectColumn(self.id, index), "select_column", |t| {
            if index >= t.cols() {
                return Err(TensorError::ColumnOutOfRange { index, cols: t.cols() });
            }
            Ok(Tensor::from_fn(t.rows(), 1, |r, _| t.get(r, index)))
        })
    }

    /// `sum_j c_j sum_c prod_{v in S_j} x[v][c]` over sparse terms `(S_j, c_j)`.
    /// Singleton terms are linear in their row. Each term's gradient uses
    /// leave-one-out products like [`Var::column_product`].
    pub fn term_sum(&self, terms: &Arc<[(Vec<usize>, f64)]>) -> Result<Var<'t>, TensorError> {
        self.unary(Op::TermSum(self.id, Arc::clone(terms)), "term_sum", |t| {
            let mut total = 0.0;
            for (vertices, coefficient) in terms.iter() {
                if let Some(&v) = vertices.iter().find(|&&v| v >= t.rows()) {
                    return Err(TensorError::RowOutOfRange {
                        index: v,
                        rows: t.rows(),
                    });
                }
                let per_group: f64 = (0..t.cols())
                    .map(|c| vertices.iter().map(|&v| t.get(v, c)).product::<f64>())
                    .sum();
                total += coefficient * per_group;
            }
            Ok(Tensor::scalar(total))
        })
    }

    /// Shape check helper used by callers that combine several vars.
    pub fn expect_shape(&self, shape: (usize, usize), op: &'static str) -> Result<(), TensorError> {
        let own = self.shape();
        if own == shape {
            Ok(())
        } else {
            Err(TensorError::ShapeMismatch {
                op,
                left: own,
                right: shape,
            })
        }
    }
}
