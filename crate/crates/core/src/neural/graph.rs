//! Reverse-mode differentiation over a fixed op vocabulary.
//!
//! A [`Graph`] is a tape: every op appends a node holding its forward value.
//! [`Graph::backward`] walks the tape in reverse, visiting only nodes that
//! reach the loss without crossing a `stop_gradient` node.

use std::collections::HashMap;
use std::ops::Range;

use super::params::{Grads, ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Exp(NodeId),
    Log { x: NodeId, floor: f64 },
    Embedding { table: NodeId, ids: Vec<usize> },
    Concat(Vec<NodeId>),
    Stack(Vec<NodeId>),
    Rows { x: NodeId, range: Range<usize> },
    MeanRows(NodeId),
    Gather { x: NodeId, index: usize },
    Softmax(NodeId),
    LogSoftmax(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    StopGradient,
}

impl Op {
    fn inputs(&self) -> Vec<NodeId> {
        match self {
            Op::Constant | Op::Param => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::Scale(x, _)
            | Op::Tanh(x)
            | Op::Sigmoid(x)
            | Op::Exp(x)
            | Op::Log { x, .. }
            | Op::Rows { x, .. }
            | Op::MeanRows(x)
            | Op::Gather { x, .. }
            | Op::Softmax(x)
            | Op::LogSoftmax(x)
            | Op::Sum(x)
            | Op::Mean(x) => vec![*x],
            Op::Embedding { table, .. } => vec![*table],
            Op::Concat(xs) | Op::Stack(xs) => xs.clone(),
            // the edge into a stop-gradient node is never followed backward
            Op::StopGradient => vec![],
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Expression tape.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<ParamId, NodeId>,
    stop_values: Vec<Tensor>,
    frozen: Option<Vec<Tensor>>,
    clamped_logs: usize,
}

/// `plus[node] − minus[node]` for two tapes recorded by the same builder.
///
/// The subtraction is pushed through the additive structure of the loss
/// (sums, scales, concatenation, gather) and through `log` as
/// `ln_1p(d / b)`, so each difference is taken between small terms rather
/// than between two nearly equal totals.
pub(crate) fn value_difference(plus: &Graph, minus: &Graph, node: NodeId) -> Vec<f64> {
    let naive = || {
        let (a, b) = (plus.value(node).data(), minus.value(node).data());
        a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<f64>>()
    };
    if plus.nodes.len() != minus.nodes.len() {
        return naive();
    }
    let diff = |n: NodeId| value_difference(plus, minus, n);
    match &plus.nodes[node.0].op {
        Op::Add(a, b) => diff(*a).iter().zip(diff(*b)).map(|(x, y)| x + y).collect(),
        Op::Sub(a, b) => diff(*a).iter().zip(diff(*b)).map(|(x, y)| x - y).collect(),
        Op::Scale(x, c) => diff(*x).iter().map(|d| c * d).collect(),
        Op::Sum(x) => vec![diff(*x).iter().sum()],
        Op::Mean(x) => {
            let d = diff(*x);
            vec![d.iter().sum::<f64>() / d.len() as f64]
        }
        Op::Concat(xs) => xs.iter().flat_map(|x| diff(*x)).collect(),
        Op::Gather { x, index } => vec![diff(*x)[*index]],
        Op::Log { x, floor } => {
            let base = minus.value(*x).data();
            let plus_x = plus.value(*x).data();
            if base.iter().chain(plus_x).any(|v| v < floor) {
                return naive();
            }
            diff(*x).iter().zip(base).map(|(d, b)| (d / b).ln_1p()).collect()
        }
        _ => naive(),
    }
}

/// Result of a backward pass.
#[derive(Debug)]
pub struct Gradients {
    per_node: Vec<Option<Tensor>>,
    param_nodes: Vec<(ParamId, NodeId)>,
    visited: Vec<bool>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. a node; `None` when the node was not visited.
    pub fn wrt(&self, node: NodeId) -> Option<&Tensor> {
        self.per_node[node.0].as_ref()
    }

    pub fn was_visited(&self, node: NodeId) -> bool {
        self.visited[node.0]
    }

    pub fn visit_count(&self) -> usize {
        self.visited.iter().filter(|v| **v).count()
    }

    /// Collects parameter gradients; parameters not reached get zeros.
    pub fn into_param_grads(mut self, store: &ParamStore) -> Grads {
        let mut grads = Grads::zeros_like(store);
        for (pid, nid) in self.param_nodes {
            if let Some(g) = self.per_node[nid.0].take() {
                *grads.get_mut(pid) = g;
            }
        }
        grads
    }
}

fn check_same(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

fn softmax_values(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// A graph whose `stop_gradient` nodes replay previously recorded values
    /// in creation order instead of their live inputs.
    pub fn with_frozen_stops(values: Vec<Tensor>) -> Self {
        Graph {
            frozen: Some(values),
            ..Self::default()
        }
    }

    /// Forward values of every `stop_gradient` node, in creation order.
    pub fn stop_values(&self) -> &[Tensor] {
        &self.stop_values
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of `log` evaluations that hit their floor.
    pub fn clamped_logs(&self) -> usize {
        self.clamped_logs
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value.item()
    }

    fn push(&mut self, op: Op, value: Tensor, name: &'static str) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        self.nodes.push(Node { op, value });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: Tensor) -> Result<NodeId> {
        self.push(Op::Constant, value, "constant")
    }

    /// Leaf for a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<NodeId> {
        if let Some(&n) = self.params.get(&id) {
            return Ok(n);
        }
        let n = self.push(Op::Param, store.value(id).clone(), "param")?;
        self.params.insert(id, n);
        Ok(n)
    }

    /// Matrix/vector product. Supported shapes: `[m,n]·[n]`, `[m,n]·[n,p]`,
    /// `[n]·[n,p]` and `[n]·[n]` (dot product, scalar result).
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        let (sa, sb) = (av.shape().to_vec(), bv.shape().to_vec());
        let out = match (sa.as_slice(), sb.as_slice()) {
            (&[m, n], &[n2]) if n == n2 => {
                let (ad, bd) = (av.data(), bv.data());
                let out = (0..m)
                    .map(|i| ad[i * n..(i + 1) * n].iter().zip(bd).map(|(x, y)| x * y).sum())
                    .collect();
                Tensor::vector(out)
            }
            (&[m, n], &[n2, p]) if n == n2 => {
                let (ad, bd) = (av.data(), bv.data());
                let mut out = vec![0.0; m * p];
                for i in 0..m {
                    let row = &mut out[i * p..(i + 1) * p];
                    for j in 0..n {
                        let x = ad[i * n + j];
                        if x != 0.0 {
                            for (o, y) in row.iter_mut().zip(&bd[j * p..(j + 1) * p]) {
                                *o += x * y;
                            }
                        }
                    }
                }
                Tensor::matrix(m, p, out)?
            }
            (&[n], &[n2, p]) if n == n2 => {
                let (ad, bd) = (av.data(), bv.data());
                let mut out = vec![0.0; p];
                for j in 0..n {
                    let x = ad[j];
                    for (o, y) in out.iter_mut().zip(&bd[j * p..(j + 1) * p]) {
                        *o += x * y;
                    }
                }
                Tensor::vector(out)
            }
            (&[n], &[n2]) if n == n2 => Tensor::scalar(av.data().iter().zip(bv.data()).map(|(x, y)| x * y).sum()),
            _ => return Err(Error::shape("matmul", format!("{sa:?} x {sb:?}"))),
        };
        self.push(Op::MatMul(a, b), out, "matmul")
    }

    fn zip_with(&mut self, name: &'static str, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (av, bv) = (self.value(a), self.value(b));
        check_same(name, av, bv)?;
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| f(*x, *y)).collect();
        Tensor::new(av.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.zip_with("add", a, b, |x, y| x + y)?;
        self.push(Op::Add(a, b), v, "add")
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.zip_with("sub", a, b, |x, y| x - y)?;
        self.push(Op::Sub(a, b), v, "sub")
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.zip_with("mul", a, b, |x, y| x * y)?;
        self.push(Op::Mul(a, b), v, "mul")
    }

    fn map(&self, x: NodeId, f: impl Fn(f64) -> f64) -> Tensor {
        let xv = self.value(x);
        Tensor::new(xv.shape().to_vec(), xv.data().iter().map(|v| f(*v)).collect()).expect("same shape")
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        let v = self.map(x, |v| v * c);
        self.push(Op::Scale(x, c), v, "scale")
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.map(x, f64::tanh);
        self.push(Op::Tanh(x), v, "tanh")
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.map(x, |v| 1.0 / (1.0 + (-v).exp()));
        self.push(Op::Sigmoid(x), v, "sigmoid")
    }

    pub fn exp(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.map(x, f64::exp);
        self.push(Op::Exp(x), v, "exp")
    }

    /// `ln(max(x, floor))`; the gradient is zero where the floor is active.
    pub fn log(&mut self, x: NodeId, floor: f64) -> Result<NodeId> {
        let clamped = self.value(x).data().iter().filter(|v| **v < floor).count();
        if clamped > 0 {
            self.clamped_logs += clamped;
            log::warn!("log argument below {floor:e} clamped ({clamped} values)");
        }
        let v = self.map(x, |v| v.max(floor).ln());
        self.push(Op::Log { x, floor }, v, "log")
    }

    /// Gathers rows of an embedding table: `[V,D]` → `[n,D]`.
    pub fn embedding(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        let v = self.gather_rows(table, ids)?;
        let v = Tensor::matrix(ids.len(), v.len() / ids.len().max(1), v.into_data())?;
        self.push(
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            v,
            "embedding",
        )
    }

    /// Single embedding row as a vector `[D]`.
    pub fn lookup(&mut self, table: NodeId, id: usize) -> Result<NodeId> {
        let v = self.gather_rows(table, &[id])?;
        self.push(
            Op::Embedding {
                table,
                ids: vec![id],
            },
            v,
            "embedding",
        )
    }

    fn gather_rows(&self, table: NodeId, ids: &[usize]) -> Result<Tensor> {
        let t = self.value(table);
        if t.rank() != 2 {
            return Err(Error::shape("embedding", format!("table shape {:?}", t.shape())));
        }
        let mut out = Vec::with_capacity(ids.len() * t.cols());
        for &id in ids {
            if id >= t.rows() {
                return Err(Error::shape("embedding", format!("id {id} >= {} rows", t.rows())));
            }
            out.extend_from_slice(t.row(id));
        }
        Ok(Tensor::vector(out))
    }

    /// Concatenates vectors and scalars into one vector.
    pub fn concat(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        let mut out = Vec::new();
        for &x in xs {
            let v = self.value(x);
            if v.rank() > 1 {
                return Err(Error::shape("concat", format!("operand shape {:?}", v.shape())));
            }
            out.extend_from_slice(v.data());
        }
        self.push(Op::Concat(xs.to_vec()), Tensor::vector(out), "concat")
    }

    /// Stacks equal-length vectors into a `[n,d]` matrix.
    pub fn stack(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        if xs.is_empty() {
            return Err(Error::shape("stack", "no operands"));
        }
        let d = self.value(xs[0]).len();
        let mut out = Vec::with_capacity(xs.len() * d);
        for &x in xs {
            let v = self.value(x);
            if v.rank() != 1 || v.len() != d {
                return Err(Error::shape("stack", format!("operand shape {:?}, expected [{d}]", v.shape())));
            }
            out.extend_from_slice(v.data());
        }
        let t = Tensor::matrix(xs.len(), d, out)?;
        self.push(Op::Stack(xs.to_vec()), t, "stack")
    }

    /// Row slice of a matrix.
    pub fn rows(&mut self, x: NodeId, range: Range<usize>) -> Result<NodeId> {
        let v = self.value(x);
        if v.rank() != 2 || range.end > v.rows() || range.is_empty() {
            return Err(Error::shape("rows", format!("{range:?} of {:?}", v.shape())));
        }
        let c = v.cols();
        let t = Tensor::matrix(range.len(), c, v.data()[range.start * c..range.end * c].to_vec())?;
        self.push(Op::Rows { x, range }, t, "rows")
    }

    /// Mean over rows: `[n,d]` → `[d]`.
    pub fn mean_rows(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x);
        if v.rank() != 2 || v.rows() == 0 {
            return Err(Error::shape("mean_rows", format!("{:?}", v.shape())));
        }
        let (n, d) = (v.rows(), v.cols());
        let mut out = vec![0.0; d];
        for i in 0..n {
            for (o, x) in out.iter_mut().zip(v.row(i)) {
                *o += x;
            }
        }
        for o in &mut out {
            *o /= n as f64;
        }
        self.push(Op::MeanRows(x), Tensor::vector(out), "mean_rows")
    }

    /// Element of a vector as a scalar.
    pub fn gather(&mut self, x: NodeId, index: usize) -> Result<NodeId> {
        let v = self.value(x);
        if v.rank() != 1 || index >= v.len() {
            return Err(Error::shape("gather", format!("index {index} of {:?}", v.shape())));
        }
        let t = Tensor::scalar(v.data()[index]);
        self.push(Op::Gather { x, index }, t, "gather")
    }

    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x);
        if v.rank() != 1 || v.is_empty() {
            return Err(Error::shape("softmax", format!("{:?}", v.shape())));
        }
        let t = Tensor::vector(softmax_values(v.data()));
        self.push(Op::Softmax(x), t, "softmax")
    }

    pub fn log_softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x);
        if v.rank() != 1 || v.is_empty() {
            return Err(Error::shape("log_softmax", format!("{:?}", v.shape())));
        }
        let max = v.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + v.data().iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        let t = Tensor::vector(v.data().iter().map(|x| x - lse).collect());
        self.push(Op::LogSoftmax(x), t, "log_softmax")
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        let t = Tensor::scalar(self.value(x).data().iter().sum());
        self.push(Op::Sum(x), t, "sum")
    }

    pub fn mean(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x);
        if v.is_empty() {
            return Err(Error::shape("mean", "empty operand"));
        }
        let t = Tensor::scalar(v.data().iter().sum::<f64>() / v.len() as f64);
        self.push(Op::Mean(x), t, "mean")
    }

    /// Identity in the forward pass; blocks every gradient path through it.
    pub fn stop_gradient(&mut self, x: NodeId) -> Result<NodeId> {
        let k = self.stop_values.len();
        let value = match &self.frozen {
            Some(frozen) => {
                let f = frozen
                    .get(k)
                    .ok_or_else(|| Error::shape("stop_gradient", "more stop nodes than frozen values"))?;
                check_same("stop_gradient", f, self.value(x))?;
                f.clone()
            }
            None => self.value(x).clone(),
        };
        self.stop_values.push(value.clone());
        self.push(Op::StopGradient, value, "stop_gradient")
    }

    /// Reverse pass from a scalar node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::shape("backward", format!("loss shape {:?}", self.value(loss).shape())));
        }
        let n = self.nodes.len();
        let mut needed = vec![false; n];
        needed[loss.0] = true;
        for i in (0..=loss.0).rev() {
            if needed[i] {
                for inp in self.nodes[i].op.inputs() {
                    needed[inp.0] = true;
                }
            }
        }

        let mut grads: Vec<Option<Tensor>> = vec![None; n];
        grads[loss.0] = Some(Tensor::new(self.value(loss).shape().to_vec(), vec![1.0])?);

        for i in (0..=loss.0).rev() {
            if !needed[i] {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }

        let param_nodes = self.params.iter().map(|(p, n)| (*p, *n)).collect();
        Ok(Gradients {
            per_node: grads,
            param_nodes,
            visited: needed,
        })
    }

    fn backprop_node(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let gd = g.data();
        match &node.op {
            Op::Constant | Op::Param | Op::StopGradient => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (ga, gb) = matmul_backward(av, bv, g);
                accumulate(grads, *a, ga);
                accumulate(grads, *b, gb);
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g.clone());
                let mut neg = g.clone();
                neg.scale_in_place(-1.0);
                accumulate(grads, *b, neg);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                accumulate(grads, *a, elementwise(g, bv, |g, y| g * y));
                accumulate(grads, *b, elementwise(g, av, |g, x| g * x));
            }
            Op::Scale(x, c) => {
                let mut s = g.clone();
                s.scale_in_place(*c);
                accumulate(grads, *x, s);
            }
            Op::Tanh(x) => accumulate(grads, *x, elementwise(g, &node.value, |g, y| g * (1.0 - y * y))),
            Op::Sigmoid(x) => accumulate(grads, *x, elementwise(g, &node.value, |g, y| g * y * (1.0 - y))),
            Op::Exp(x) => accumulate(grads, *x, elementwise(g, &node.value, |g, y| g * y)),
            Op::Log { x, floor } => {
                let floor = *floor;
                accumulate(grads, *x, elementwise(g, self.value(*x), |g, v| if v >= floor { g / v } else { 0.0 }));
            }
            Op::Embedding { table, ids } => {
                let tv = self.value(*table);
                let d = tv.cols();
                let mut gt = Tensor::zeros(tv.shape());
                for (k, &id) in ids.iter().enumerate() {
                    for (o, v) in gt.data_mut()[id * d..(id + 1) * d].iter_mut().zip(&gd[k * d..(k + 1) * d]) {
                        *o += v;
                    }
                }
                accumulate(grads, *table, gt);
            }
            Op::Concat(xs) | Op::Stack(xs) => {
                let mut offset = 0;
                for x in xs {
                    let xv = self.value(*x);
                    let len = xv.len();
                    let part = Tensor::new(xv.shape().to_vec(), gd[offset..offset + len].to_vec()).expect("same shape");
                    accumulate(grads, *x, part);
                    offset += len;
                }
            }
            Op::Rows { x, range } => {
                let xv = self.value(*x);
                let c = xv.cols();
                let mut gx = Tensor::zeros(xv.shape());
                gx.data_mut()[range.start * c..range.end * c].copy_from_slice(gd);
                accumulate(grads, *x, gx);
            }
            Op::MeanRows(x) => {
                let xv = self.value(*x);
                let n = xv.rows() as f64;
                let mut gx = Tensor::zeros(xv.shape());
                let d = xv.cols();
                for r in 0..xv.rows() {
                    for (o, v) in gx.data_mut()[r * d..(r + 1) * d].iter_mut().zip(gd) {
                        *o = v / n;
                    }
                }
                accumulate(grads, *x, gx);
            }
            Op::Gather { x, index } => {
                let mut gx = Tensor::zeros(self.value(*x).shape());
                gx.data_mut()[*index] = gd[0];
                accumulate(grads, *x, gx);
            }
            Op::Softmax(x) => {
                let y = node.value.data();
                let dot: f64 = gd.iter().zip(y).map(|(g, y)| g * y).sum();
                let gx = y.iter().zip(gd).map(|(y, g)| y * (g - dot)).collect();
                accumulate(grads, *x, Tensor::vector(gx));
            }
            Op::LogSoftmax(x) => {
                let total: f64 = gd.iter().sum();
                let gx = node
                    .value
                    .data()
                    .iter()
                    .zip(gd)
                    .map(|(ly, g)| g - ly.exp() * total)
                    .collect();
                accumulate(grads, *x, Tensor::vector(gx));
            }
            Op::Sum(x) => {
                let xv = self.value(*x);
                let gx = Tensor::new(xv.shape().to_vec(), vec![gd[0]; xv.len()]).expect("same shape");
                accumulate(grads, *x, gx);
            }
            Op::Mean(x) => {
                let xv = self.value(*x);
                let v = gd[0] / xv.len() as f64;
                let gx = Tensor::new(xv.shape().to_vec(), vec![v; xv.len()]).expect("same shape");
                accumulate(grads, *x, gx);
            }
        }
    }
}

fn elementwise(g: &Tensor, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = g.data().iter().zip(other.data()).map(|(a, b)| f(*a, *b)).collect();
    Tensor::new(g.shape().to_vec(), data).expect("same shape")
}

fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
    match &mut grads[id.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn matmul_backward(a: &Tensor, b: &Tensor, g: &Tensor) -> (Tensor, Tensor) {
    let (ad, bd, gd) = (a.data(), b.data(), g.data());
    match (a.shape(), b.shape()) {
        (&[m, n], &[_]) => {
            let mut ga = vec![0.0; m * n];
            let mut gb = vec![0.0; n];
            for i in 0..m {
                let gi = gd[i];
                let arow = &ad[i * n..(i + 1) * n];
                for (o, y) in ga[i * n..(i + 1) * n].iter_mut().zip(bd) {
                    *o = gi * y;
                }
                for (o, x) in gb.iter_mut().zip(arow) {
                    *o += gi * x;
                }
            }
            (
                Tensor::matrix(m, n, ga).expect("shape"),
                Tensor::vector(gb),
            )
        }
        (&[m, n], &[_, p]) => {
            let mut ga = vec![0.0; m * n];
            let mut gb = vec![0.0; n * p];
            for i in 0..m {
                let grow = &gd[i * p..(i + 1) * p];
                for j in 0..n {
                    let brow = &bd[j * p..(j + 1) * p];
                    ga[i * n + j] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                    let x = ad[i * n + j];
                    for (o, gv) in gb[j * p..(j + 1) * p].iter_mut().zip(grow) {
                        *o += x * gv;
                    }
                }
            }
            (
                Tensor::matrix(m, n, ga).expect("shape"),
                Tensor::matrix(n, p, gb).expect("shape"),
            )
        }
        (&[n], &[_, p]) => {
            let mut ga = vec![0.0; n];
            let mut gb = vec![0.0; n * p];
            for j in 0..n {
                let brow = &bd[j * p..(j + 1) * p];
                ga[j] = gd.iter().zip(brow).map(|(x, y)| x * y).sum();
                for (o, gv) in gb[j * p..(j + 1) * p].iter_mut().zip(gd) {
                    *o = ad[j] * gv;
                }
            }
            (Tensor::vector(ga), Tensor::matrix(n, p, gb).expect("shape"))
        }
        _ => {
            let s = gd[0];
            (
                Tensor::vector(bd.iter().map(|y| s * y).collect()),
                Tensor::vector(ad.iter().map(|x| s * x).collect()),
            )
        }
    }
}
