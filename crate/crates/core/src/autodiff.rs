//! Reverse-mode differentiation over [`DenseMatrix`] values.
//!
//! A [`Tape`] records every primitive in insertion order, so insertion order
//! is a valid topological order. [`Tape::backward`] walks the nodes strictly
//! in reverse and accumulates gradients edge by edge in a fixed order, which
//! keeps results bitwise reproducible.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{self, Activation, DenseMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Act(NodeId, Activation),
    Softmax(NodeId),
    ConcatRows(Vec<NodeId>),
    ConcatCols(Vec<NodeId>),
    AddN(Vec<NodeId>),
    Sum(NodeId),
    SumSquares(NodeId),
    Norm(NodeId),
}

#[derive(Clone, Debug)]
struct Node {
    value: DenseMatrix,
    op: Op,
    // false when no tracked leaf is upstream; backward skips such nodes
    tracked: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    // param slot -> node holding that parameter's value on this tape
    params: Vec<Option<NodeId>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops all recorded nodes, keeping allocations.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.params.clear();
    }

    pub fn value(&self, id: NodeId) -> &DenseMatrix {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: DenseMatrix, op: Op) -> NodeId {
        let tracked = match &op {
            Op::Leaf => true,
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => {
                self.is_tracked(*a) || self.is_tracked(*b)
            }
            Op::Scale(a, _)
            | Op::Act(a, _)
            | Op::Softmax(a)
            | Op::Sum(a)
            | Op::SumSquares(a)
            | Op::Norm(a) => self.is_tracked(*a),
            Op::ConcatRows(ps) | Op::ConcatCols(ps) | Op::AddN(ps) => {
                ps.iter().any(|p| self.is_tracked(*p))
            }
        };
        self.nodes.push(Node { value, op, tracked });
        NodeId(self.nodes.len() - 1)
    }

    fn is_tracked(&self, id: NodeId) -> bool {
        self.nodes[id.0].tracked
    }

    /// Records a value that never receives a gradient.
    pub fn constant(&mut self, value: DenseMatrix) -> NodeId {
        let id = self.push(value, Op::Leaf);
        self.nodes[id.0].tracked = false;
        id
    }

    /// Records a tracked leaf whose gradient can be read back from
    /// [`Gradients::wrt`]; used to probe sensitivities of arbitrary inputs.
    pub fn input(&mut self, value: DenseMatrix) -> NodeId {
        self.push(value, Op::Leaf)
    }

    /// Binds learnable parameter `slot`. Repeated calls with the same slot
    /// return the same node, so gradients from every use accumulate there.
    pub fn param(&mut self, slot: usize, value: &DenseMatrix) -> NodeId {
        if let Some(Some(id)) = self.params.get(slot) {
            return *id;
        }
        let id = self.push(value.clone(), Op::Leaf);
        if self.params.len() <= slot {
            self.params.resize(slot + 1, None);
        }
        self.params[slot] = Some(id);
        id
    }

    pub fn param_node(&self, slot: usize) -> Option<NodeId> {
        self.params.get(slot).copied().flatten()
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::matmul(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::add(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::sub(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::hadamard(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let v = tensor::scale(self.value(a), s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn act(&mut self, a: NodeId, act: Activation) -> Result<NodeId> {
        if act == Activation::Identity {
            return Ok(a);
        }
        let v = tensor::elementwise(act, self.value(a))?;
        Ok(self.push(v, Op::Act(a, act)))
    }

    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let v = tensor::softmax(self.value(a))?;
        Ok(self.push(v, Op::Softmax(a)))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let vals: Vec<&DenseMatrix> = parts.iter().map(|&p| self.value(p)).collect();
        let v = tensor::concat_rows(&vals)?;
        Ok(self.push(v, Op::ConcatRows(parts.to_vec())))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let vals: Vec<&DenseMatrix> = parts.iter().map(|&p| self.value(p)).collect();
        let v = tensor::concat_cols(&vals)?;
        Ok(self.push(v, Op::ConcatCols(parts.to_vec())))
    }

    /// Sum of equally shaped nodes.
    pub fn add_n(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = parts.first().ok_or(Error::Domain("add_n of no terms"))?;
        let mut v = self.value(*first).clone();
        for &p in &parts[1..] {
            let pv = self.value(p);
            if pv.shape() != v.shape() {
                return Err(Error::Dimension { op: "add_n", left: v.shape(), right: pv.shape() });
            }
            v.add_assign(pv);
        }
        Ok(self.push(v, Op::AddN(parts.to_vec())))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let v = DenseMatrix::scalar(self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    pub fn sum_squares(&mut self, a: NodeId) -> NodeId {
        let v = DenseMatrix::scalar(tensor::squared_norm(self.value(a).as_slice()));
        self.push(v, Op::SumSquares(a))
    }

    /// Euclidean norm. The gradient at the origin is taken to be zero.
    pub fn norm(&mut self, a: NodeId) -> NodeId {
        let v = DenseMatrix::scalar(libm::sqrt(tensor::squared_norm(self.value(a).as_slice())));
        self.push(v, Op::Norm(a))
    }

    /// Gradients of the scalar `root` with respect to every recorded node.
    pub fn backward(&self, root: NodeId) -> Result<Gradients> {
        if self.value(root).shape() != (1, 1) {
            return Err(Error::Contract("backward root must be a 1x1 scalar"));
        }
        let mut grads: Vec<Option<DenseMatrix>> = vec![None; root.0 + 1];
        grads[root.0] = Some(DenseMatrix::scalar(1.0));

        let nodes = &self.nodes;
        let acc = |grads: &mut [Option<DenseMatrix>], id: NodeId, g: DenseMatrix| {
            if nodes[id.0].tracked {
                accumulate(grads, id, g);
            }
        };

        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            let Some(g) = grads[idx].clone() else { continue };
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    // dA = G B^T, dB = A^T G
                    if nodes[a.0].tracked {
                        acc(&mut grads, *a, matmul_nt(&g, self.value(*b)));
                    }
                    if nodes[b.0].tracked {
                        acc(&mut grads, *b, matmul_tn(self.value(*a), &g));
                    }
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, tensor::scale(&g, -1.0));
                }
                Op::Mul(a, b) => {
                    let ga = tensor::hadamard(&g, self.value(*b))?;
                    let gb = tensor::hadamard(&g, self.value(*a))?;
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Scale(a, s) => acc(&mut grads, *a, tensor::scale(&g, *s)),
                Op::Act(a, act) => {
                    let x = self.value(*a).as_slice();
                    let y = node.value.as_slice();
                    let mut ga = g;
                    for ((gi, &xi), &yi) in ga.as_mut_slice().iter_mut().zip(x).zip(y) {
                        *gi *= act.derivative(xi, yi);
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Softmax(a) => {
                    // dx_i = y_i (g_i - sum_j g_j y_j)
                    let y = node.value.as_slice();
                    let dot: f64 = g.as_slice().iter().zip(y).map(|(gi, yi)| gi * yi).sum();
                    let mut ga = g;
                    for (gi, &yi) in ga.as_mut_slice().iter_mut().zip(y) {
                        *gi = yi * (*gi - dot);
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::ConcatRows(parts) => {
                    let cols = g.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let rows = self.value(p).rows();
                        let slice = g.as_slice()[offset * cols..(offset + rows) * cols].to_vec();
                        acc(&mut grads, p, DenseMatrix::from_vec(rows, cols, slice)?);
                        offset += rows;
                    }
                }
                Op::ConcatCols(parts) => {
                    let rows = g.rows();
                    let total = g.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let cols = self.value(p).cols();
                        let mut part = DenseMatrix::zeros(rows, cols);
                        for r in 0..rows {
                            for c in 0..cols {
                                part.set(r, c, g.as_slice()[r * total + offset + c]);
                            }
                        }
                        acc(&mut grads, p, part);
                        offset += cols;
                    }
                }
                Op::AddN(parts) => {
                    for &p in parts {
                        acc(&mut grads, p, g.clone());
                    }
                }
                Op::Sum(a) => {
                    let (r, c) = self.value(*a).shape();
                    acc(&mut grads, *a, DenseMatrix::filled(r, c, g.get(0, 0)));
                }
                Op::SumSquares(a) => {
                    let s = 2.0 * g.get(0, 0);
                    acc(&mut grads, *a, tensor::scale(self.value(*a), s));
                }
                Op::Norm(a) => {
                    let n = node.value.get(0, 0);
                    let x = self.value(*a);
                    let ga = if n > 0.0 {
                        tensor::scale(x, g.get(0, 0) / n)
                    } else {
                        DenseMatrix::zeros(x.rows(), x.cols())
                    };
                    acc(&mut grads, *a, ga);
                }
            }
        }
        Ok(Gradients { grads, params: self.params.clone() })
    }
}

fn accumulate(grads: &mut [Option<DenseMatrix>], id: NodeId, g: DenseMatrix) {
    match &mut grads[id.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// `G * B^T`
fn matmul_nt(g: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let (n, m) = g.shape();
    let k = b.rows();
    let mut out = DenseMatrix::zeros(n, k);
    let gs = g.as_slice();
    let bs = b.as_slice();
    let os = out.as_mut_slice();
    for i in 0..n {
        let grow = &gs[i * m..(i + 1) * m];
        for p in 0..k {
            let brow = &bs[p * m..(p + 1) * m];
            let mut acc = 0.0;
            for (x, y) in grow.iter().zip(brow) {
                acc += x * y;
            }
            os[i * k + p] = acc;
        }
    }
    out
}

/// `A^T * G`
fn matmul_tn(a: &DenseMatrix, g: &DenseMatrix) -> DenseMatrix {
    let (n, k) = a.shape();
    let m = g.cols();
    let mut out = DenseMatrix::zeros(k, m);
    let as_ = a.as_slice();
    let gs = g.as_slice();
    let os = out.as_mut_slice();
    for i in 0..n {
        let grow = &gs[i * m..(i + 1) * m];
        for p in 0..k {
            let aip = as_[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let orow = &mut os[p * m..(p + 1) * m];
            for (o, gv) in orow.iter_mut().zip(grow) {
                *o += aip * gv;
            }
        }
    }
    out
}

/// Result of [`Tape::backward`].
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<DenseMatrix>>,
    params: Vec<Option<NodeId>>,
}

impl Gradients {
    /// Gradient of the root with respect to `id`, or `None` when the root does
    /// not depend on it.
    pub fn wrt(&self, id: NodeId) -> Option<&DenseMatrix> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// Gradient for parameter `slot`; zeros shaped like `like` when the slot
    /// was never bound or never reached.
    pub fn param_or_zeros(&self, slot: usize, like: &DenseMatrix) -> DenseMatrix {
        self.params
            .get(slot)
            .copied()
            .flatten()
            .and_then(|id| self.wrt(id).cloned())
            .unwrap_or_else(|| DenseMatrix::zeros(like.rows(), like.cols()))
    }
}
