//! Define-by-run computation graph with reverse-mode gradients.
//!
//! Operations compute their value eagerly and append a node to a tape; the
//! tape order is already topological, so `backward` walks it once in reverse,
//! accumulating gradients per node. A graph is built fresh for every bag and
//! dropped after the optimizer step.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::mathx;
use crate::numerics::tensor::Tensor;

/// Index of a node on the tape.
pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("{op}: shape mismatch ({detail})")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("backward needs a scalar loss node, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("backward already ran on this graph")]
    BackwardAlreadyRan,
    #[error("backward called on an empty graph")]
    EmptyGraph,
    #[error("node {id} out of range ({len} nodes on the tape)")]
    InvalidNode { id: usize, len: usize },
    #[error("non-finite value in {context}")]
    NonFinite { context: String },
}

fn shape_err(op: &'static str, detail: String) -> NumericsError {
    NumericsError::ShapeMismatch { op, detail }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    /// Elementwise product.
    Mul(NodeId, NodeId),
    /// `A v` for matrix A and vector v.
    MatVec(NodeId, NodeId),
    /// `vᵀ A` for vector v and matrix A.
    VecMat(NodeId, NodeId),
    Dot(NodeId, NodeId),
    Sum(NodeId),
    /// Flattening concatenation into one vector.
    Concat(Vec<NodeId>),
    /// Stack equal-length vectors as the rows of a matrix.
    StackRows(Vec<NodeId>),
    /// Select one row of a matrix as a vector.
    Row(NodeId, usize),
    /// Select one element as a scalar.
    Element(NodeId, usize),
    /// Select rows `idx` of a matrix as a new matrix (duplicates allowed).
    Gather(NodeId, Vec<usize>),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Exp(NodeId),
    /// `ln(x)` clamped below at `floor`; zero gradient inside the clamped
    /// region, NaN propagating.
    LogClamped(NodeId, f64),
    /// Max-subtracted softmax over a vector.
    Softmax(NodeId),
    /// Softmax with a deliberately wrong backward rule. Only used by tests to
    /// prove the finite-difference oracle catches a corrupted gradient.
    #[cfg(test)]
    SoftmaxSkewed(NodeId),
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Gradient contribution flowing into one input node. Sparse variants avoid
/// materializing a full zero tensor for row/element selections.
enum Contrib {
    Full(Tensor),
    ScaledFull(Tensor, f64),
    Row(usize, Tensor),
    Rows(Vec<usize>, Tensor),
    Elem(usize, f64),
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    ran_backward: bool,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    /// Number of nodes on the tape.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        self.nodes.len() - 1
    }

    /// Insert a tensor the caller wants gradients for.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value)
    }

    /// Insert a tensor treated as a constant. Constants are leaves too; they
    /// simply never get read back. Kept separate for call-site clarity.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value)
    }

    /// Borrow the forward value of a node.
    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    /// Gradient of the loss with respect to node `id`, if backward has run
    /// and the node participated in the loss.
    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id).and_then(|g| g.as_ref())
    }

    fn check(&self, op: &'static str, id: NodeId) -> Result<(), NumericsError> {
        if id >= self.nodes.len() {
            return Err(NumericsError::InvalidNode {
                id,
                len: self.nodes.len(),
            });
        }
        let _ = op;
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        self.check("add", a)?;
        self.check("add", b)?;
        let (ta, tb) = (&self.nodes[a].value, &self.nodes[b].value);
        if ta.shape() != tb.shape() {
            return Err(shape_err(
                "add",
                format!("{:?} vs {:?}", ta.shape(), tb.shape()),
            ));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| x + y)
            .collect();
        let out = Tensor::new(ta.shape().to_vec(), data);
        Ok(self.push(Op::Add(a, b), out))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        self.check("sub", a)?;
        self.check("sub", b)?;
        let (ta, tb) = (&self.nodes[a].value, &self.nodes[b].value);
        if ta.shape() != tb.shape() {
            return Err(shape_err(
                "sub",
                format!("{:?} vs {:?}", ta.shape(), tb.shape()),
            ));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| x - y)
            .collect();
        let out = Tensor::new(ta.shape().to_vec(), data);
        Ok(self.push(Op::Sub(a, b), out))
    }

    /// Elementwise product of same-shaped tensors.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        self.check("mul", a)?;
        self.check("mul", b)?;
        let (ta, tb) = (&self.nodes[a].value, &self.nodes[b].value);
        if ta.shape() != tb.shape() {
            return Err(shape_err(
                "mul",
                format!("{:?} vs {:?}", ta.shape(), tb.shape()),
            ));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| x * y)
            .collect();
        let out = Tensor::new(ta.shape().to_vec(), data);
        Ok(self.push(Op::Mul(a, b), out))
    }

    /// `A v`: `[m,k] × [k] → [m]`.
    pub fn matvec(&mut self, a: NodeId, v: NodeId) -> Result<NodeId, NumericsError> {
        self.check("matvec", a)?;
        self.check("matvec", v)?;
        let (ta, tv) = (&self.nodes[a].value, &self.nodes[v].value);
        if ta.rank() != 2 || tv.rank() != 1 || ta.cols() != tv.len() {
            return Err(shape_err(
                "matvec",
                format!("matrix {:?} × vector {:?}", ta.shape(), tv.shape()),
            ));
        }
        let m = ta.rows();
        let mut out = vec![0.0; m];
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(ta.row(i), tv.data());
        }
        Ok(self.push(Op::MatVec(a, v), Tensor::vector(out)))
    }

    /// `vᵀ A`: `[m] × [m,k] → [k]`.
    pub fn vecmat(&mut self, v: NodeId, a: NodeId) -> Result<NodeId, NumericsError> {
        self.check("vecmat", v)?;
        self.check("vecmat", a)?;
        let (tv, ta) = (&self.nodes[v].value, &self.nodes[a].value);
        if tv.rank() != 1 || ta.rank() != 2 || ta.rows() != tv.len() {
            return Err(shape_err(
                "vecmat",
                format!("vector {:?} × matrix {:?}", tv.shape(), ta.shape()),
            ));
        }
        let k = ta.cols();
        let mut out = vec![0.0; k];
        for i in 0..ta.rows() {
            let x = tv.data()[i];
            if x != 0.0 {
                for (j, o) in out.iter_mut().enumerate() {
                    *o += x * ta.row(i)[j];
                }
            }
        }
        Ok(self.push(Op::VecMat(v, a), Tensor::vector(out)))
    }

    /// Inner product of two equal-length vectors; yields a scalar.
    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        self.check("dot", a)?;
        self.check("dot", b)?;
        let (ta, tb) = (&self.nodes[a].value, &self.nodes[b].value);
        if ta.rank() != 1 || tb.rank() != 1 || ta.len() != tb.len() {
            return Err(shape_err(
                "dot",
                format!("{:?} vs {:?}", ta.shape(), tb.shape()),
            ));
        }
        let v = dot(ta.data(), tb.data());
        Ok(self.push(Op::Dot(a, b), Tensor::scalar(v)))
    }

    /// Sum of all elements; yields a scalar.
    pub fn sum(&mut self, x: NodeId) -> Result<NodeId, NumericsError> {
        self.check("sum", x)?;
        let v = self.nodes[x].value.data().iter().sum();
        Ok(self.push(Op::Sum(x), Tensor::scalar(v)))
    }

    /// Concatenate any tensors into one vector, in tape argument order.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId, NumericsError> {
        if parts.is_empty() {
            return Err(shape_err("concat", String::from("no inputs")));
        }
        for &p in parts {
            self.check("concat", p)?;
        }
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.nodes[p].value.data());
        }
        Ok(self.push(Op::Concat(parts.to_vec()), Tensor::vector(data)))
    }

    /// Stack `n` vectors of equal length `d` into an `[n, d]` matrix.
    pub fn stack_rows(&mut self, rows: &[NodeId]) -> Result<NodeId, NumericsError> {
        if rows.is_empty() {
            return Err(shape_err("stack_rows", String::from("no inputs")));
        }
        for &r in rows {
            self.check("stack_rows", r)?;
        }
        let d = self.nodes[rows[0]].value.len();
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            let t = &self.nodes[r].value;
            if t.rank() != 1 || t.len() != d {
                return Err(shape_err(
                    "stack_rows",
                    format!("expected vectors of length {}, got {:?}", d, t.shape()),
                ));
            }
            data.extend_from_slice(t.data());
        }
        Ok(self.push(Op::StackRows(rows.to_vec()), Tensor::matrix(rows.len(), d, data)))
    }

    /// Row `i` of a matrix, as a vector.
    pub fn row(&mut self, m: NodeId, i: usize) -> Result<NodeId, NumericsError> {
        self.check("row", m)?;
        let t = &self.nodes[m].value;
        if t.rank() != 2 || i >= t.rows() {
            return Err(shape_err(
                "row",
                format!("row {} of shape {:?}", i, t.shape()),
            ));
        }
        let out = Tensor::vector(t.row(i).to_vec());
        Ok(self.push(Op::Row(m, i), out))
    }

    /// Element `i` of the flattened tensor, as a scalar.
    pub fn element(&mut self, x: NodeId, i: usize) -> Result<NodeId, NumericsError> {
        self.check("element", x)?;
        let t = &self.nodes[x].value;
        if i >= t.len() {
            return Err(shape_err(
                "element",
                format!("element {} of shape {:?}", i, t.shape()),
            ));
        }
        let out = Tensor::scalar(t.data()[i]);
        Ok(self.push(Op::Element(x, i), out))
    }

    /// Rows `idx` of a matrix as a new `[idx.len(), cols]` matrix. Indices may
    /// repeat; backward accumulates into the shared source row.
    pub fn gather(&mut self, m: NodeId, idx: &[usize]) -> Result<NodeId, NumericsError> {
        self.check("gather", m)?;
        let t = &self.nodes[m].value;
        if t.rank() != 2 {
            return Err(shape_err("gather", format!("from shape {:?}", t.shape())));
        }
        if idx.is_empty() {
            return Err(shape_err("gather", String::from("no row indices")));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= t.rows()) {
            return Err(shape_err(
                "gather",
                format!("row {} of shape {:?}", bad, t.shape()),
            ));
        }
        let c = t.cols();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            data.extend_from_slice(t.row(i));
        }
        let out = Tensor::matrix(idx.len(), c, data);
        Ok(self.push(Op::Gather(m, idx.to_vec()), out))
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId, NumericsError> {
        self.check("tanh", x)?;
        let t = &self.nodes[x].value;
        let data = t.data().iter().map(|&v| mathx::tanh(v)).collect();
        let out = Tensor::new(t.shape().to_vec(), data);
        Ok(self.push(Op::Tanh(x), out))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId, NumericsError> {
        self.check("sigmoid", x)?;
        let t = &self.nodes[x].value;
        let data = t.data().iter().map(|&v| mathx::sigmoid(v)).collect();
        let out = Tensor::new(t.shape().to_vec(), data);
        Ok(self.push(Op::Sigmoid(x), out))
    }

    pub fn exp(&mut self, x: NodeId) -> Result<NodeId, NumericsError> {
        self.check("exp", x)?;
        let t = &self.nodes[x].value;
        let data = t.data().iter().map(|&v| mathx::exp(v)).collect();
        let out = Tensor::new(t.shape().to_vec(), data);
        Ok(self.push(Op::Exp(x), out))
    }

    /// `ln(max(x, floor))` elementwise. Inside the clamp the value is constant
    /// `ln(floor)` and the gradient is zero, which keeps losses finite when a
    /// probability underflows.
    pub fn log_clamped(&mut self, x: NodeId, floor: f64) -> Result<NodeId, NumericsError> {
        self.check("log_clamped", x)?;
        assert!(floor > 0.0, "log floor must be positive, got {floor}");
        let t = &self.nodes[x].value;
        // `v < floor` keeps NaN in the propagating branch: a poisoned input
        // must surface as a non-finite loss, not vanish into the clamp.
        let data = t
            .data()
            .iter()
            .map(|&v| {
                if v < floor {
                    mathx::ln(floor)
                } else {
                    mathx::ln(v)
                }
            })
            .collect();
        let out = Tensor::new(t.shape().to_vec(), data);
        Ok(self.push(Op::LogClamped(x, floor), out))
    }

    /// Softmax over a vector, computed with max subtraction so the largest
    /// exponent is exactly zero.
    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId, NumericsError> {
        self.check("softmax", x)?;
        let t = &self.nodes[x].value;
        if t.rank() != 1 {
            return Err(shape_err(
                "softmax",
                format!("wants a vector, got {:?}", t.shape()),
            ));
        }
        let out = Tensor::vector(softmax_values(t.data()));
        Ok(self.push(Op::Softmax(x), out))
    }

    /// Identical forward to [`Graph::softmax`] but with an off-by-one error
    /// planted in the backward rule; exists so tests can prove the
    /// finite-difference oracle rejects a corrupted gradient.
    #[cfg(test)]
    pub(crate) fn softmax_skewed(&mut self, x: NodeId) -> Result<NodeId, NumericsError> {
        self.check("softmax", x)?;
        let t = &self.nodes[x].value;
        if t.rank() != 1 {
            return Err(shape_err(
                "softmax",
                format!("wants a vector, got {:?}", t.shape()),
            ));
        }
        let out = Tensor::vector(softmax_values(t.data()));
        Ok(self.push(Op::SoftmaxSkewed(x), out))
    }

    /// Reverse pass from a scalar loss node. Runs once per graph; gradients
    /// are then readable through [`Graph::grad`].
    pub fn backward(&mut self, loss: NodeId) -> Result<(), NumericsError> {
        if self.ran_backward {
            return Err(NumericsError::BackwardAlreadyRan);
        }
        if self.nodes.is_empty() {
            return Err(NumericsError::EmptyGraph);
        }
        if loss >= self.nodes.len() {
            return Err(NumericsError::InvalidNode {
                id: loss,
                len: self.nodes.len(),
            });
        }
        if !self.nodes[loss].value.is_scalar() {
            return Err(NumericsError::NonScalarLoss {
                shape: self.nodes[loss].value.shape().to_vec(),
            });
        }
        self.grads = vec![None; self.nodes.len()];
        self.grads[loss] = Some(Tensor::scalar(1.0));
        for id in (0..=loss).rev() {
            let Some(g) = self.grads[id].clone() else {
                continue;
            };
            for (target, contrib) in self.local_contribs(id, &g) {
                let shape = self.nodes[target].value.shape().to_vec();
                let slot = &mut self.grads[target];
                apply_contrib(slot, &shape, contrib);
            }
        }
        self.ran_backward = true;
        Ok(())
    }

    /// Gradient contributions of node `id` to its inputs given upstream
    /// gradient `g`.
    fn local_contribs(&self, id: NodeId, g: &Tensor) -> Vec<(NodeId, Contrib)> {
        let node = &self.nodes[id];
        let y = &node.value;
        match &node.op {
            Op::Leaf => vec![],
            Op::Add(a, b) => vec![
                (*a, Contrib::Full(g.clone())),
                (*b, Contrib::Full(g.clone())),
            ],
            Op::Sub(a, b) => vec![
                (*a, Contrib::Full(g.clone())),
                (*b, Contrib::ScaledFull(g.clone(), -1.0)),
            ],
            Op::Mul(a, b) => {
                let (ta, tb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                let da = elementwise(g, tb, |x, y| x * y);
                let db = elementwise(g, ta, |x, y| x * y);
                vec![(*a, Contrib::Full(da)), (*b, Contrib::Full(db))]
            }
            Op::MatVec(a, v) => {
                let (ta, tv) = (&self.nodes[*a].value, &self.nodes[*v].value);
                let (m, k) = (ta.rows(), ta.cols());
                let mut da = vec![0.0; m * k];
                for i in 0..m {
                    let gi = g.data()[i];
                    if gi != 0.0 {
                        for j in 0..k {
                            da[i * k + j] = gi * tv.data()[j];
                        }
                    }
                }
                let mut dv = vec![0.0; k];
                for i in 0..m {
                    let gi = g.data()[i];
                    if gi != 0.0 {
                        for (j, o) in dv.iter_mut().enumerate() {
                            *o += gi * ta.row(i)[j];
                        }
                    }
                }
                vec![
                    (*a, Contrib::Full(Tensor::matrix(m, k, da))),
                    (*v, Contrib::Full(Tensor::vector(dv))),
                ]
            }
            Op::VecMat(v, a) => {
                let (tv, ta) = (&self.nodes[*v].value, &self.nodes[*a].value);
                let (m, k) = (ta.rows(), ta.cols());
                let mut dv = vec![0.0; m];
                for (i, o) in dv.iter_mut().enumerate() {
                    *o = dot(ta.row(i), g.data());
                }
                let mut da = vec![0.0; m * k];
                for i in 0..m {
                    let xi = tv.data()[i];
                    if xi != 0.0 {
                        for j in 0..k {
                            da[i * k + j] = xi * g.data()[j];
                        }
                    }
                }
                vec![
                    (*v, Contrib::Full(Tensor::vector(dv))),
                    (*a, Contrib::Full(Tensor::matrix(m, k, da))),
                ]
            }
            Op::Dot(a, b) => {
                let g0 = g.item();
                let (ta, tb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                let da = Tensor::vector(tb.data().iter().map(|&x| g0 * x).collect());
                let db = Tensor::vector(ta.data().iter().map(|&x| g0 * x).collect());
                vec![(*a, Contrib::Full(da)), (*b, Contrib::Full(db))]
            }
            Op::Sum(x) => {
                let g0 = g.item();
                let tx = &self.nodes[*x].value;
                vec![(*x, Contrib::Full(Tensor::filled(tx.shape(), g0)))]
            }
            Op::Concat(parts) => {
                let mut out = Vec::with_capacity(parts.len());
                let mut offset = 0;
                for &p in parts {
                    let t = &self.nodes[p].value;
                    let piece = g.data()[offset..offset + t.len()].to_vec();
                    out.push((p, Contrib::Full(Tensor::new(t.shape().to_vec(), piece))));
                    offset += t.len();
                }
                out
            }
            Op::StackRows(rows) => rows
                .iter()
                .enumerate()
                .map(|(i, &r)| (r, Contrib::Full(Tensor::vector(g.row(i).to_vec()))))
                .collect(),
            Op::Row(m, i) => vec![(*m, Contrib::Row(*i, g.clone()))],
            Op::Element(x, i) => vec![(*x, Contrib::Elem(*i, g.item()))],
            Op::Gather(m, idx) => vec![(*m, Contrib::Rows(idx.clone(), g.clone()))],
            Op::Tanh(x) => {
                let d = elementwise(g, y, |gi, yi| gi * (1.0 - yi * yi));
                vec![(*x, Contrib::Full(d))]
            }
            Op::Sigmoid(x) => {
                let d = elementwise(g, y, |gi, yi| gi * yi * (1.0 - yi));
                vec![(*x, Contrib::Full(d))]
            }
            Op::Exp(x) => {
                let d = elementwise(g, y, |gi, yi| gi * yi);
                vec![(*x, Contrib::Full(d))]
            }
            Op::LogClamped(x, floor) => {
                let tx = &self.nodes[*x].value;
                let data = g
                    .data()
                    .iter()
                    .zip(tx.data())
                    .map(|(&gi, &xi)| if xi < *floor { 0.0 } else { gi / xi })
                    .collect();
                vec![(*x, Contrib::Full(Tensor::new(tx.shape().to_vec(), data)))]
            }
            Op::Softmax(x) => {
                let s = dot(g.data(), y.data());
                let data = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(&gi, &yi)| yi * (gi - s))
                    .collect();
                vec![(*x, Contrib::Full(Tensor::vector(data)))]
            }
            #[cfg(test)]
            Op::SoftmaxSkewed(x) => {
                let n = y.len();
                let s = dot(g.data(), y.data());
                let data = (0..n)
                    .map(|i| y.data()[i] * (g.data()[(i + 1) % n] - s))
                    .collect();
                vec![(*x, Contrib::Full(Tensor::vector(data)))]
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn elementwise(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    debug_assert_eq!(a.shape(), b.shape());
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data)
}

/// Stable softmax used by the graph op; exposed for callers that need the
/// same numbers outside a graph.
pub fn softmax_values(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, mathx::max);
    let mut out: Vec<f64> = z.iter().map(|&v| mathx::exp(v - m)).collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    out
}

fn apply_contrib(slot: &mut Option<Tensor>, shape: &[usize], c: Contrib) {
    if slot.is_none() {
        *slot = Some(Tensor::zeros(shape));
    }
    let acc = slot.as_mut().expect("just initialized");
    match c {
        Contrib::Full(t) => {
            debug_assert_eq!(acc.shape(), t.shape());
            for (o, v) in acc.data_mut().iter_mut().zip(t.data()) {
                *o += v;
            }
        }
        Contrib::ScaledFull(t, s) => {
            debug_assert_eq!(acc.shape(), t.shape());
            for (o, v) in acc.data_mut().iter_mut().zip(t.data()) {
                *o += s * v;
            }
        }
        Contrib::Row(i, t) => {
            let c = acc.cols();
            for (j, v) in t.data().iter().enumerate() {
                acc.data_mut()[i * c + j] += v;
            }
        }
        Contrib::Rows(idx, t) => {
            let c = acc.cols();
            for (r, &i) in idx.iter().enumerate() {
                for j in 0..c {
                    acc.data_mut()[i * c + j] += t.at(r, j);
                }
            }
        }
        Contrib::Elem(i, v) => {
            acc.data_mut()[i] += v;
        }
    }
}
