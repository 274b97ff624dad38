//! Recorded computation with reverse-mode differentiation.
//!
//! Operations are appended to a [`Tape`] with their shapes checked at record
//! time. [`Tape::evaluate`] runs the forward pass against a [`ParamStore`] and
//! keeps every intermediate; [`Tape::backward`] walks the record in reverse and
//! accumulates parameter gradients into a [`GradStore`].
//!
//! Because parameters are referenced by id rather than copied in, the same
//! record can be re-evaluated after parameters change. Finite-difference
//! checks rely on that.

use crate::compute::tensor::{gemm_a_bt_acc, gemm_acc, gemm_at_b_acc};
use crate::compute::{GradStore, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Probability floor applied before taking a log in [`Tape::cross_entropy`].
pub const PROB_FLOOR: f64 = 1e-12;

/// Handle to a value in a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Along the row axis: concatenation stacks rows, reduction yields `1 x cols`.
    Rows,
    /// Along the column axis: concatenation joins columns, reduction yields `rows x 1`.
    Cols,
}

/// How the right operand of an elementwise op is expanded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Broadcast {
    Same,
    Row,
    Col,
    Scalar,
}

#[derive(Clone, Debug)]
enum Op {
    Input(Tensor),
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var, Broadcast),
    Mul(Var, Var, Broadcast),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    SoftmaxRows(Var),
    Concat(Vec<Var>, Axis),
    GatherRows(Var, Vec<usize>),
    SliceCols(Var, usize, usize),
    Mean(Var, Axis),
    Sum(Var),
    SumSquares(Var),
    CrossEntropy(Var, usize),
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    shape: [usize; 2],
    needs_grad: bool,
}

/// An ordered record of primitive operations.
///
/// Inputs of every node precede it, so the record is always in topological
/// order. A tape is single-writer; distinct tapes may evaluate concurrently
/// against the same read-only [`ParamStore`].
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    values: Vec<Option<Tensor>>,
    evaluated: bool,
    clamped: usize,
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

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.nodes[v.0].shape
    }

    /// Number of cross-entropy terms whose gold probability hit [`PROB_FLOOR`]
    /// in the last evaluation.
    pub fn clamped_count(&self) -> usize {
        self.clamped
    }

    /// Value of a node after [`Tape::evaluate`]. Parameter leaves return `None`;
    /// read those from the store.
    pub fn value(&self, v: Var) -> Option<&Tensor> {
        if !self.evaluated {
            return None;
        }
        match &self.nodes[v.0].op {
            Op::Input(t) => Some(t),
            Op::Param(_) => None,
            _ => self.values[v.0].as_ref(),
        }
    }

    fn push(&mut self, op: Op, shape: [usize; 2], needs_grad: bool) -> Var {
        self.evaluated = false;
        self.nodes.push(Node { op, shape, needs_grad });
        self.values.push(None);
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    // ---- leaves -------------------------------------------------------

    /// A constant input; never receives a gradient.
    pub fn input(&mut self, t: Tensor) -> Var {
        let shape = t.shape();
        self.push(Op::Input(t), shape, false)
    }

    pub fn param(&mut self, params: &ParamStore, id: ParamId) -> Var {
        let p = params.get(id);
        self.push(Op::Param(id), p.value.shape(), p.trainable)
    }

    // ---- primitives ---------------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa[1] != sb[0] {
            return Err(Error::Shape { op: "matmul", lhs: sa, rhs: sb });
        }
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Op::MatMul(a, b), [sa[0], sb[1]], ng))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let s = self.shape(a);
        let ng = self.ng(a);
        self.push(Op::Transpose(a), [s[1], s[0]], ng)
    }

    fn broadcast(op: &'static str, sa: [usize; 2], sb: [usize; 2]) -> Result<Broadcast> {
        if sa == sb {
            Ok(Broadcast::Same)
        } else if sb == [1, 1] {
            Ok(Broadcast::Scalar)
        } else if sb[0] == 1 && sb[1] == sa[1] {
            Ok(Broadcast::Row)
        } else if sb[1] == 1 && sb[0] == sa[0] {
            Ok(Broadcast::Col)
        } else {
            Err(Error::Shape { op, lhs: sa, rhs: sb })
        }
    }

    /// Elementwise `a + b`. `b` may also be a `1 x cols` row, a `rows x 1`
    /// column, or a scalar, expanded across `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let bc = Self::broadcast("add", sa, sb)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Op::Add(a, b, bc), sa, ng))
    }

    /// Elementwise `a * b` with the same broadcasting rules as [`Tape::add`].
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let bc = Self::broadcast("mul", sa, sb)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Op::Mul(a, b, bc), sa, ng))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let (s, ng) = (self.shape(a), self.ng(a));
        self.push(Op::Scale(a, c), s, ng)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let (s, ng) = (self.shape(a), self.ng(a));
        self.push(Op::Tanh(a), s, ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let (s, ng) = (self.shape(a), self.ng(a));
        self.push(Op::Sigmoid(a), s, ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let (s, ng) = (self.shape(a), self.ng(a));
        self.push(Op::Relu(a), s, ng)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let (s, ng) = (self.shape(a), self.ng(a));
        self.push(Op::SoftmaxRows(a), s, ng)
    }

    pub fn concat(&mut self, parts: &[Var], axis: Axis) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| Error::InvalidOp {
            op: "concat",
            msg: "no inputs".into(),
        })?;
        let mut shape = self.shape(first);
        for &p in &parts[1..] {
            let s = self.shape(p);
            match axis {
                Axis::Rows if s[1] == shape[1] => shape[0] += s[0],
                Axis::Cols if s[0] == shape[0] => shape[1] += s[1],
                _ => return Err(Error::Shape { op: "concat", lhs: shape, rhs: s }),
            }
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(Op::Concat(parts.to_vec(), axis), shape, ng))
    }

    /// Selects rows of `src` by index; repeated indices are allowed.
    pub fn gather_rows(&mut self, src: Var, indices: &[usize]) -> Result<Var> {
        let s = self.shape(src);
        if indices.is_empty() {
            return Err(Error::InvalidOp { op: "gather_rows", msg: "no indices".into() });
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= s[0]) {
            return Err(Error::Index { op: "gather_rows", index: bad, extent: s[0] });
        }
        let ng = self.ng(src);
        Ok(self.push(Op::GatherRows(src, indices.to_vec()), [indices.len(), s[1]], ng))
    }

    /// Columns `start..end` of `src`.
    pub fn slice_cols(&mut self, src: Var, start: usize, end: usize) -> Result<Var> {
        let s = self.shape(src);
        if start >= end || end > s[1] {
            return Err(Error::Index { op: "slice_cols", index: end, extent: s[1] });
        }
        let ng = self.ng(src);
        Ok(self.push(Op::SliceCols(src, start, end), [s[0], end - start], ng))
    }

    /// Mean along `axis` (see [`Axis`]).
    pub fn mean(&mut self, a: Var, axis: Axis) -> Var {
        let (s, ng) = (self.shape(a), self.ng(a));
        let shape = match axis {
            Axis::Rows => [1, s[1]],
            Axis::Cols => [s[0], 1],
        };
        self.push(Op::Mean(a, axis), shape, ng)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let ng = self.ng(a);
        self.push(Op::Sum(a), [1, 1], ng)
    }

    pub fn sum_squares(&mut self, a: Var) -> Var {
        let ng = self.ng(a);
        self.push(Op::SumSquares(a), [1, 1], ng)
    }

    /// `-ln p[target]` for a `1 x k` probability row, with `p` floored at
    /// [`PROB_FLOOR`].
    pub fn cross_entropy(&mut self, probs: Var, target: usize) -> Result<Var> {
        let s = self.shape(probs);
        if s[0] != 1 {
            return Err(Error::Shape { op: "cross_entropy", lhs: s, rhs: [1, s[1]] });
        }
        if target >= s[1] {
            return Err(Error::Index { op: "cross_entropy", index: target, extent: s[1] });
        }
        let ng = self.ng(probs);
        Ok(self.push(Op::CrossEntropy(probs, target), [1, 1], ng))
    }

    // ---- forward ------------------------------------------------------

    /// Runs the forward pass, retaining every intermediate value.
    ///
    /// Re-evaluating an unchanged record reproduces identical bits.
    pub fn evaluate(&mut self, params: &ParamStore) -> Result<()> {
        let mut values: Vec<Option<Tensor>> = Vec::with_capacity(self.nodes.len());
        let mut clamped = 0;
        for node in &self.nodes {
            if let Op::Param(id) = node.op {
                if id.0 >= params.len() || params.value(id).shape() != node.shape {
                    return Err(Error::InvalidOp {
                        op: "param",
                        msg: format!("parameter {} missing or reshaped since recording", id.0),
                    });
                }
            }
            let out = forward_node(&node.op, node.shape, &self.nodes, &values, params, &mut clamped);
            values.push(out);
        }
        self.values = values;
        self.clamped = clamped;
        self.evaluated = true;
        Ok(())
    }

    // ---- backward -----------------------------------------------------

    /// Propagates `seed` (the gradient of some objective w.r.t. `out`) back
    /// through the record, adding parameter gradients into `grads`.
    ///
    /// Only trainable parameters reachable from `out` receive a contribution.
    pub fn backward(&self, params: &ParamStore, out: Var, seed: &Tensor, grads: &mut GradStore) -> Result<()> {
        if !self.evaluated {
            return Err(Error::NotEvaluated);
        }
        let out_shape = self.shape(out);
        if seed.shape() != out_shape {
            return Err(Error::Shape { op: "backward", lhs: out_shape, rhs: seed.shape() });
        }
        if grads.len() != params.len() {
            return Err(Error::InvalidOp {
                op: "backward",
                msg: "gradient store does not mirror the parameter store".into(),
            });
        }
        let mut local: Vec<Option<Tensor>> = vec![None; out.0 + 1];
        local[out.0] = Some(seed.clone());
        let mut bp = Backprop { tape: self, params, local, grads };
        for i in (0..=out.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(g) = bp.local[i].take() else { continue };
            bp.step(i, g);
        }
        Ok(())
    }

    /// Convenience for scalar outputs: backward with seed 1.
    pub fn backward_scalar(&self, params: &ParamStore, out: Var, grads: &mut GradStore) -> Result<()> {
        let s = self.shape(out);
        if s != [1, 1] {
            return Err(Error::NotScalar(s));
        }
        self.backward(params, out, &Tensor::scalar(1.0), grads)
    }

    fn val<'a>(&'a self, params: &'a ParamStore, v: Var) -> &'a Tensor {
        lookup(&self.nodes, &self.values, params, v)
    }
}

fn lookup<'a>(nodes: &'a [Node], values: &'a [Option<Tensor>], params: &'a ParamStore, v: Var) -> &'a Tensor {
    match &nodes[v.0].op {
        Op::Input(t) => t,
        Op::Param(id) => params.value(*id),
        _ => values[v.0].as_ref().expect("node evaluated before use"),
    }
}

fn forward_node(
    op: &Op,
    shape: [usize; 2],
    nodes: &[Node],
    values: &[Option<Tensor>],
    params: &ParamStore,
    clamped: &mut usize,
) -> Option<Tensor> {
    let get = |v: Var| lookup(nodes, values, params, v);
    let out = match op {
        Op::Input(_) | Op::Param(_) => return None,
        Op::MatMul(a, b) => {
            let mut out = Tensor::zeros(shape[0], shape[1]);
            gemm_acc(get(*a), get(*b), &mut out);
            out
        }
        Op::Transpose(a) => get(*a).transpose(),
        Op::Add(a, b, bc) => elementwise(get(*a), get(*b), *bc, |x, y| x + y),
        Op::Mul(a, b, bc) => elementwise(get(*a), get(*b), *bc, |x, y| x * y),
        Op::Scale(a, c) => get(*a).map(|x| x * c),
        Op::Tanh(a) => get(*a).map(f64::tanh),
        Op::Sigmoid(a) => get(*a).map(sigmoid),
        Op::Relu(a) => get(*a).map(|x| if x > 0.0 { x } else { 0.0 }),
        Op::SoftmaxRows(a) => crate::compute::tensor::softmax_rows(get(*a)),
        Op::Concat(parts, axis) => {
            let mut out = Tensor::zeros(shape[0], shape[1]);
            let mut offset = 0;
            for p in parts {
                let t = get(*p);
                match axis {
                    Axis::Rows => {
                        // row-major: stacked rows are contiguous
                        let n = t.len();
                        out.data_mut()[offset..offset + n].copy_from_slice(t.data());
                        offset += n;
                    }
                    Axis::Cols => {
                        for r in 0..t.rows() {
                            let dst = &mut out.row_slice_mut(r)[offset..offset + t.cols()];
                            dst.copy_from_slice(t.row_slice(r));
                        }
                        offset += t.cols();
                    }
                }
            }
            out
        }
        Op::GatherRows(src, idx) => {
            let t = get(*src);
            let mut out = Tensor::zeros(shape[0], shape[1]);
            for (r, &i) in idx.iter().enumerate() {
                out.row_slice_mut(r).copy_from_slice(t.row_slice(i));
            }
            out
        }
        Op::SliceCols(src, start, end) => {
            let t = get(*src);
            let mut out = Tensor::zeros(shape[0], shape[1]);
            for r in 0..t.rows() {
                out.row_slice_mut(r).copy_from_slice(&t.row_slice(r)[*start..*end]);
            }
            out
        }
        Op::Mean(a, axis) => {
            let t = get(*a);
            let mut out = Tensor::zeros(shape[0], shape[1]);
            match axis {
                Axis::Rows => {
                    for r in 0..t.rows() {
                        for (o, v) in out.data_mut().iter_mut().zip(t.row_slice(r)) {
                            *o += v;
                        }
                    }
                    let n = t.rows() as f64;
                    out.data_mut().iter_mut().for_each(|o| *o /= n);
                }
                Axis::Cols => {
                    let n = t.cols() as f64;
                    for r in 0..t.rows() {
                        out.data_mut()[r] = t.row_slice(r).iter().sum::<f64>() / n;
                    }
                }
            }
            out
        }
        Op::Sum(a) => Tensor::scalar(get(*a).sum()),
        Op::SumSquares(a) => Tensor::scalar(get(*a).sum_squares()),
        Op::CrossEntropy(p, target) => {
            let prob = get(*p).data()[*target];
            if prob < PROB_FLOOR {
                *clamped += 1;
            }
            Tensor::scalar(-prob.max(PROB_FLOOR).ln())
        }
    };
    Some(out)
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn elementwise(a: &Tensor, b: &Tensor, bc: Broadcast, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let (rows, cols) = (a.rows(), a.cols());
    let mut out = Tensor::zeros(rows, cols);
    let (ad, bd) = (a.data(), b.data());
    let od = out.data_mut();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            let bv = match bc {
                Broadcast::Same => bd[i],
                Broadcast::Row => bd[c],
                Broadcast::Col => bd[r],
                Broadcast::Scalar => bd[0],
            };
            od[i] = f(ad[i], bv);
        }
    }
    out
}

/// Sums a full-size gradient down to the operand's broadcast shape.
fn reduce_broadcast(g: &Tensor, bc: Broadcast, shape: [usize; 2]) -> Tensor {
    match bc {
        Broadcast::Same => g.clone(),
        Broadcast::Scalar => Tensor::scalar(g.sum()),
        Broadcast::Row => {
            let mut out = Tensor::zeros(1, shape[1]);
            for r in 0..g.rows() {
                for (o, v) in out.data_mut().iter_mut().zip(g.row_slice(r)) {
                    *o += v;
                }
            }
            out
        }
        Broadcast::Col => {
            let mut out = Tensor::zeros(shape[0], 1);
            for r in 0..g.rows() {
                out.data_mut()[r] = g.row_slice(r).iter().sum();
            }
            out
        }
    }
}

struct Backprop<'a> {
    tape: &'a Tape,
    params: &'a ParamStore,
    local: Vec<Option<Tensor>>,
    grads: &'a mut GradStore,
}

impl Backprop<'_> {
    /// Adds `g` into the gradient slot of `v`.
    fn send(&mut self, v: Var, g: Tensor) {
        if !self.tape.nodes[v.0].needs_grad {
            return;
        }
        match &mut self.local[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.tape.nodes[v.0].needs_grad
    }

    fn step(&mut self, i: usize, g: Tensor) {
        let tape = self.tape;
        let params = self.params;
        let node = &tape.nodes[i];
        let out_val = || tape.values[i].as_ref().expect("evaluated");
        match &node.op {
            Op::Input(_) => {}
            Op::Param(id) => self.grads.accumulate(*id, &g),
            Op::MatMul(a, b) => {
                let (av, bv) = (tape.val(params, *a), tape.val(params, *b));
                if self.wants(*a) {
                    if let Op::Param(id) = tape.nodes[a.0].op {
                        gemm_a_bt_acc(&g, bv, self.grads.get_mut(id));
                        self.grads.mark(id);
                    } else {
                        let mut ga = Tensor::zeros(av.rows(), av.cols());
                        gemm_a_bt_acc(&g, bv, &mut ga);
                        self.send(*a, ga);
                    }
                }
                if self.wants(*b) {
                    if let Op::Param(id) = tape.nodes[b.0].op {
                        gemm_at_b_acc(av, &g, self.grads.get_mut(id));
                        self.grads.mark(id);
                    } else {
                        let mut gb = Tensor::zeros(bv.rows(), bv.cols());
                        gemm_at_b_acc(av, &g, &mut gb);
                        self.send(*b, gb);
                    }
                }
            }
            Op::Transpose(a) => self.send(*a, g.transpose()),
            Op::Add(a, b, bc) => {
                if self.wants(*b) {
                    let gb = reduce_broadcast(&g, *bc, tape.shape(*b));
                    self.send(*b, gb);
                }
                self.send(*a, g);
            }
            Op::Mul(a, b, bc) => {
                let (av, bv) = (tape.val(params, *a), tape.val(params, *b));
                if self.wants(*b) {
                    let prod = elementwise(&g, av, Broadcast::Same, |x, y| x * y);
                    self.send(*b, reduce_broadcast(&prod, *bc, tape.shape(*b)));
                }
                if self.wants(*a) {
                    self.send(*a, elementwise(&g, bv, *bc, |x, y| x * y));
                }
            }
            Op::Scale(a, c) => self.send(*a, g.map(|x| x * c)),
            Op::Tanh(a) => {
                let y = out_val();
                self.send(*a, elementwise(&g, y, Broadcast::Same, |d, y| d * (1.0 - y * y)));
            }
            Op::Sigmoid(a) => {
                let y = out_val();
                self.send(*a, elementwise(&g, y, Broadcast::Same, |d, y| d * y * (1.0 - y)));
            }
            Op::Relu(a) => {
                let y = out_val();
                self.send(*a, elementwise(&g, y, Broadcast::Same, |d, y| if y > 0.0 { d } else { 0.0 }));
            }
            Op::SoftmaxRows(a) => {
                let y = out_val();
                let mut ga = Tensor::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row_slice(r), g.row_slice(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(p, d)| p * d).sum();
                    for (o, (p, d)) in ga.row_slice_mut(r).iter_mut().zip(yr.iter().zip(gr)) {
                        *o = p * (d - dot);
                    }
                }
                self.send(*a, ga);
            }
            Op::Concat(parts, axis) => {
                let mut offset = 0;
                for p in parts {
                    let s = tape.shape(*p);
                    if self.wants(*p) {
                        let mut gp = Tensor::zeros(s[0], s[1]);
                        match axis {
                            Axis::Rows => {
                                for r in 0..s[0] {
                                    gp.row_slice_mut(r).copy_from_slice(g.row_slice(offset + r));
                                }
                            }
                            Axis::Cols => {
                                for r in 0..s[0] {
                                    gp.row_slice_mut(r).copy_from_slice(&g.row_slice(r)[offset..offset + s[1]]);
                                }
                            }
                        }
                        self.send(*p, gp);
                    }
                    offset += match axis {
                        Axis::Rows => s[0],
                        Axis::Cols => s[1],
                    };
                }
            }
            Op::GatherRows(src, idx) => {
                if let Op::Param(id) = tape.nodes[src.0].op {
                    // scatter straight into the store
                    let dst = self.grads.get_mut(id);
                    for (r, &row) in idx.iter().enumerate() {
                        for (o, v) in dst.row_slice_mut(row).iter_mut().zip(g.row_slice(r)) {
                            *o += v;
                        }
                    }
                    self.grads.mark(id);
                } else {
                    let s = tape.shape(*src);
                    let mut gs = Tensor::zeros(s[0], s[1]);
                    for (r, &row) in idx.iter().enumerate() {
                        for (o, v) in gs.row_slice_mut(row).iter_mut().zip(g.row_slice(r)) {
                            *o += v;
                        }
                    }
                    self.send(*src, gs);
                }
            }
            Op::SliceCols(src, start, _) => {
                let s = tape.shape(*src);
                let mut gs = Tensor::zeros(s[0], s[1]);
                for r in 0..s[0] {
                    let w = g.cols();
                    gs.row_slice_mut(r)[*start..*start + w].copy_from_slice(g.row_slice(r));
                }
                self.send(*src, gs);
            }
            Op::Mean(a, axis) => {
                let s = tape.shape(*a);
                let mut ga = Tensor::zeros(s[0], s[1]);
                match axis {
                    Axis::Rows => {
                        let n = s[0] as f64;
                        for r in 0..s[0] {
                            for (o, v) in ga.row_slice_mut(r).iter_mut().zip(g.data()) {
                                *o = v / n;
                            }
                        }
                    }
                    Axis::Cols => {
                        let n = s[1] as f64;
                        for r in 0..s[0] {
                            let v = g.data()[r] / n;
                            ga.row_slice_mut(r).iter_mut().for_each(|o| *o = v);
                        }
                    }
                }
                self.send(*a, ga);
            }
            Op::Sum(a) => {
                let s = tape.shape(*a);
                self.send(*a, Tensor::full(s[0], s[1], g.item()));
            }
            Op::SumSquares(a) => {
                let d = g.item();
                let x = tape.val(params, *a);
                self.send(*a, x.map(|v| 2.0 * v * d));
            }
            Op::CrossEntropy(p, target) => {
                let pv = tape.val(params, *p);
                let mut gp = Tensor::zeros(1, pv.cols());
                let prob = pv.data()[*target];
                if prob >= PROB_FLOOR {
                    gp.data_mut()[*target] = -g.item() / prob;
                }
                self.send(*p, gp);
            }
        }
    }
}
