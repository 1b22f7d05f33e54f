//! Reverse-mode tape over 2-D tensors.
//!
//! Every op appends a node holding its forward value. `backward` walks the
//! tape in reverse and accumulates gradients only into nodes that depend on a
//! parameter or a tracked leaf. Row reductions run in ascending row order, so
//! forward and backward passes are bit-reproducible.

use super::tensor::gemm;
use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    ScaleVar(Var, Var),
    AddConst(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    ConcatCols(Var, Var),
    StackRows(Vec<Var>),
    SelectRows(Var, Vec<usize>),
    ScatterSum(Var, Vec<usize>),
    LayerNorm(Var, Vec<f64>),
    Softmax(Var),
    CrossEntropy(Var, Vec<usize>, Vec<f64>, Tensor),
    Sum(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    tracked: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    bound: Vec<Option<Var>>,
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::ShapeMismatch {
        op,
        lhs: a.shape(),
        rhs: b.shape(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
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

    fn push(&mut self, value: Tensor, op: Op, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Untracked input.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Tracked input whose gradient can be read back with [`Tape::grad_of`].
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Binds a parameter; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if self.bound.len() <= id.0 {
            self.bound.resize(id.0 + 1, None);
        }
        if let Some(v) = self.bound[id.0] {
            return v;
        }
        let v = self.push(store.get(id).value.clone(), Op::Param(id), true);
        self.bound[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.rows() {
            return Err(mismatch("matmul", ta, tb));
        }
        let mut out = Tensor::zeros(ta.rows(), tb.cols());
        gemm(ta, false, tb, false, out.data_mut(), 0.0);
        let tr = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, Op::MatMul(a, b), tr))
    }

    fn zip_same(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(name, ta, tb));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let out = Tensor::from_vec(ta.rows(), ta.cols(), data)?;
        let tr = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, op, tr))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    fn zip_row(
        &mut self,
        a: Var,
        row: Var,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (ta, tr) = (self.value(a), self.value(row));
        if tr.rows() != 1 || tr.cols() != ta.cols() {
            return Err(mismatch(name, ta, tr));
        }
        let c = ta.cols();
        let data = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, tr.data()[i % c]))
            .collect();
        let out = Tensor::from_vec(ta.rows(), c, data)?;
        let tracked = self.tracked(a) || self.tracked(row);
        Ok(self.push(out, op, tracked))
    }

    /// Adds a `1 x c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.zip_row(a, row, "add_row", |x, y| x + y, Op::AddRow(a, row))
    }

    /// Multiplies every row of `a` elementwise by a `1 x c` row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.zip_row(a, row, "mul_row", |x, y| x * y, Op::MulRow(a, row))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| f(x)).collect();
        let out = Tensor::from_vec(ta.rows(), ta.cols(), data).expect("same shape");
        let tr = self.tracked(a);
        self.push(out, op, tr)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, |x| c * x, Op::Scale(a, c))
    }

    /// Multiplies `a` by a `1 x 1` variable.
    pub fn scale_var(&mut self, a: Var, s: Var) -> Result<Var> {
        let ts = self.value(s);
        if ts.shape() != (1, 1) {
            return Err(mismatch("scale_var", self.value(a), ts));
        }
        let c = ts.item();
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| c * x).collect();
        let out = Tensor::from_vec(ta.rows(), ta.cols(), data)?;
        let tr = self.tracked(a) || self.tracked(s);
        Ok(self.push(out, Op::ScaleVar(a, s), tr))
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        self.map(a, |x| x + c, Op::AddConst(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, |x| x.max(0.0), Op::Relu(a))
    }

    /// `[a | b]` along columns.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rows() != tb.rows() {
            return Err(mismatch("concat_cols", ta, tb));
        }
        let (ca, cb) = (ta.cols(), tb.cols());
        let mut data = Vec::with_capacity(ta.rows() * (ca + cb));
        for i in 0..ta.rows() {
            data.extend_from_slice(ta.row(i));
            data.extend_from_slice(tb.row(i));
        }
        let out = Tensor::from_vec(ta.rows(), ca + cb, data)?;
        let tr = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, Op::ConcatCols(a, b), tr))
    }

    /// Vertical concatenation.
    pub fn stack_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts.first().map_or(0, |&p| self.value(p).cols());
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != cols {
                return Err(mismatch("stack_rows", self.value(parts[0]), t));
            }
            data.extend_from_slice(t.data());
            rows += t.rows();
        }
        let out = Tensor::from_vec(rows, cols, data)?;
        let tr = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push(out, Op::StackRows(parts.to_vec()), tr))
    }

    /// Row gather: `out[i] = a[idx[i]]` (indices may repeat).
    pub fn select_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let ta = self.value(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= ta.rows()) {
            return Err(Error::ShapeMismatch {
                op: "select_rows",
                lhs: ta.shape(),
                rhs: (bad, 0),
            });
        }
        let mut data = Vec::with_capacity(idx.len() * ta.cols());
        for &i in idx {
            data.extend_from_slice(ta.row(i));
        }
        let out = Tensor::from_vec(idx.len(), ta.cols(), data)?;
        let tr = self.tracked(a);
        Ok(self.push(out, Op::SelectRows(a, idx.to_vec()), tr))
    }

    pub fn row(&mut self, a: Var, i: usize) -> Result<Var> {
        self.select_rows(a, &[i])
    }

    /// `out[idx[i]] += a[i]` into `n_out` zero rows, summing in ascending `i`.
    pub fn scatter_sum(&mut self, a: Var, idx: &[usize], n_out: usize) -> Result<Var> {
        let ta = self.value(a);
        if idx.len() != ta.rows() {
            return Err(Error::ShapeMismatch {
                op: "scatter_sum",
                lhs: ta.shape(),
                rhs: (idx.len(), n_out),
            });
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= n_out) {
            return Err(Error::ShapeMismatch {
                op: "scatter_sum",
                lhs: ta.shape(),
                rhs: (bad, n_out),
            });
        }
        let c = ta.cols();
        let mut out = Tensor::zeros(n_out, c);
        for (i, &r) in idx.iter().enumerate() {
            for (o, x) in out.row_mut(r).iter_mut().zip(ta.row(i)) {
                *o += x;
            }
        }
        let tr = self.tracked(a);
        Ok(self.push(out, Op::ScatterSum(a, idx.to_vec()), tr))
    }

    /// Per-row normalization to zero mean and unit variance (no affine terms).
    pub fn layer_norm(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let (r, c) = ta.shape();
        let mut out = Tensor::zeros(r, c);
        let mut inv_std = Vec::with_capacity(r);
        for i in 0..r {
            let row = ta.row(i);
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / c as f64;
            let s = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for (o, x) in out.row_mut(i).iter_mut().zip(row) {
                *o = (x - mean) * s;
            }
            inv_std.push(s);
        }
        let tr = self.tracked(a);
        self.push(out, Op::LayerNorm(a, inv_std), tr)
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let out = softmax_rows(self.value(a));
        let tr = self.tracked(a);
        self.push(out, Op::Softmax(a), tr)
    }

    /// `sum_i w_i * (-log softmax(logits_i)[labels_i])` as a `1 x 1` value.
    pub fn weighted_cross_entropy(
        &mut self,
        logits: Var,
        labels: &[usize],
        weights: &[f64],
    ) -> Result<Var> {
        let t = self.value(logits);
        if labels.len() != t.rows() || weights.len() != t.rows() {
            return Err(Error::ShapeMismatch {
                op: "cross_entropy",
                lhs: t.shape(),
                rhs: (labels.len(), weights.len()),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= t.cols()) {
            return Err(Error::InvalidParameter(format!(
                "label {bad} with {} classes",
                t.cols()
            )));
        }
        let probs = softmax_rows(t);
        let mut loss = 0.0;
        for (i, (&y, &w)) in labels.iter().zip(weights).enumerate() {
            let row = t.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            loss += w * (lse - row[y]);
        }
        let tr = self.tracked(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy(logits, labels.to_vec(), weights.to_vec(), probs),
            tr,
        ))
    }

    /// Mean cross-entropy over rows.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let w = vec![1.0 / labels.len().max(1) as f64; labels.len()];
        self.weighted_cross_entropy(logits, labels, &w)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let tr = self.tracked(a);
        self.push(Tensor::scalar(s), Op::Sum(a), tr)
    }

    /// Runs reverse accumulation from the scalar `out`. Returns per-node
    /// gradients; use [`Tape::accumulate_param_grads`] or [`Tape::grad_of`].
    pub fn backward(&self, out: Var) -> Result<Gradients> {
        if self.shape(out) != (1, 1) {
            return Err(Error::ShapeMismatch {
                op: "backward",
                lhs: self.shape(out),
                rhs: (1, 1),
            });
        }
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(out.0 + 1);
        grads.resize_with(out.0 + 1, || None);
        grads[out.0] = Some(Tensor::scalar(1.0));
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.tracked {
                self.propagate(node, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn acc<'g>(&self, grads: &'g mut [Option<Tensor>], v: Var) -> Option<&'g mut Tensor> {
        if !self.tracked(v) {
            return None;
        }
        let (r, c) = self.shape(v);
        Some(grads[v.0].get_or_insert_with(|| Tensor::zeros(r, c)))
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                if let Some(ga) = self.acc(grads, *a) {
                    gemm(g, false, tb, true, ga.data_mut(), 1.0);
                }
                if let Some(gb) = self.acc(grads, *b) {
                    gemm(ta, true, g, false, gb.data_mut(), 1.0);
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if let Some(gv) = self.acc(grads, v) {
                        gv.add_assign(g);
                    }
                }
            }
            Op::Sub(a, b) => {
                if let Some(ga) = self.acc(grads, *a) {
                    ga.add_assign(g);
                }
                if let Some(gb) = self.acc(grads, *b) {
                    for (x, y) in gb.data_mut().iter_mut().zip(g.data()) {
                        *x -= y;
                    }
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                if let Some(ga) = self.acc(grads, *a) {
                    for ((x, y), z) in ga.data_mut().iter_mut().zip(g.data()).zip(tb.data()) {
                        *x += y * z;
                    }
                }
                if let Some(gb) = self.acc(grads, *b) {
                    for ((x, y), z) in gb.data_mut().iter_mut().zip(g.data()).zip(ta.data()) {
                        *x += y * z;
                    }
                }
            }
            Op::AddRow(a, row) => {
                if let Some(ga) = self.acc(grads, *a) {
                    ga.add_assign(g);
                }
                if let Some(gr) = self.acc(grads, *row) {
                    let c = g.cols();
                    for i in 0..g.rows() {
                        for j in 0..c {
                            gr.data_mut()[j] += g.get(i, j);
                        }
                    }
                }
            }
            Op::MulRow(a, row) => {
                let ta = self.value(*a);
                let tr = self.value(*row);
                let c = g.cols();
                if self.tracked(*row) {
                    let mut acc = vec![0.0; c];
                    for i in 0..g.rows() {
                        for j in 0..c {
                            acc[j] += g.get(i, j) * ta.get(i, j);
                        }
                    }
                    let gr = self.acc(grads, *row).unwrap();
                    for (x, y) in gr.data_mut().iter_mut().zip(acc) {
                        *x += y;
                    }
                }
                let trow = tr.data();
                if let Some(ga) = self.acc(grads, *a) {
                    for (k, (x, y)) in ga.data_mut().iter_mut().zip(g.data()).enumerate() {
                        *x += y * trow[k % c];
                    }
                }
            }
            Op::Scale(a, c) => {
                if let Some(ga) = self.acc(grads, *a) {
                    for (x, y) in ga.data_mut().iter_mut().zip(g.data()) {
                        *x += c * y;
                    }
                }
            }
            Op::ScaleVar(a, s) => {
                let c = self.value(*s).item();
                if self.tracked(*s) {
                    let dot: f64 = g
                        .data()
                        .iter()
                        .zip(self.value(*a).data())
                        .map(|(x, y)| x * y)
                        .sum();
                    self.acc(grads, *s).unwrap().data_mut()[0] += dot;
                }
                if let Some(ga) = self.acc(grads, *a) {
                    for (x, y) in ga.data_mut().iter_mut().zip(g.data()) {
                        *x += c * y;
                    }
                }
            }
            Op::AddConst(a) => {
                if let Some(ga) = self.acc(grads, *a) {
                    ga.add_assign(g);
                }
            }
            Op::Sigmoid(a) => {
                let y = node.value.data();
                if let Some(ga) = self.acc(grads, *a) {
                    for ((x, d), s) in ga.data_mut().iter_mut().zip(g.data()).zip(y) {
                        *x += d * s * (1.0 - s);
                    }
                }
            }
            Op::Tanh(a) => {
                let y = node.value.data();
                if let Some(ga) = self.acc(grads, *a) {
                    for ((x, d), t) in ga.data_mut().iter_mut().zip(g.data()).zip(y) {
                        *x += d * (1.0 - t * t);
                    }
                }
            }
            Op::Relu(a) => {
                let inp = self.value(*a).data();
                if let Some(ga) = self.acc(grads, *a) {
                    for ((x, d), z) in ga.data_mut().iter_mut().zip(g.data()).zip(inp) {
                        if *z > 0.0 {
                            *x += d;
                        }
                    }
                }
            }
            Op::ConcatCols(a, b) => {
                let ca = self.value(*a).cols();
                let cb = self.value(*b).cols();
                if let Some(ga) = self.acc(grads, *a) {
                    for i in 0..g.rows() {
                        for (x, y) in ga.row_mut(i).iter_mut().zip(&g.row(i)[..ca]) {
                            *x += y;
                        }
                    }
                }
                if let Some(gb) = self.acc(grads, *b) {
                    for i in 0..g.rows() {
                        for (x, y) in gb.row_mut(i).iter_mut().zip(&g.row(i)[ca..ca + cb]) {
                            *x += y;
                        }
                    }
                }
            }
            Op::StackRows(parts) => {
                let mut start = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    if let Some(gp) = self.acc(grads, p) {
                        for (x, y) in gp.data_mut().iter_mut().zip(&g.data()[start..start + len]) {
                            *x += y;
                        }
                    }
                    start += len;
                }
            }
            Op::SelectRows(a, idx) => {
                if let Some(ga) = self.acc(grads, *a) {
                    for (i, &r) in idx.iter().enumerate() {
                        for (x, y) in ga.row_mut(r).iter_mut().zip(g.row(i)) {
                            *x += y;
                        }
                    }
                }
            }
            Op::ScatterSum(a, idx) => {
                if let Some(ga) = self.acc(grads, *a) {
                    for (i, &r) in idx.iter().enumerate() {
                        for (x, y) in ga.row_mut(i).iter_mut().zip(g.row(r)) {
                            *x += y;
                        }
                    }
                }
            }
            Op::LayerNorm(a, inv_std) => {
                let y = &node.value;
                let c = y.cols() as f64;
                if let Some(ga) = self.acc(grads, *a) {
                    for (i, s) in inv_std.iter().enumerate() {
                        let (gy, yy) = (g.row(i), y.row(i));
                        let mean_g = gy.iter().sum::<f64>() / c;
                        let mean_gy = gy.iter().zip(yy).map(|(a, b)| a * b).sum::<f64>() / c;
                        for ((x, dg), yv) in ga.row_mut(i).iter_mut().zip(gy).zip(yy) {
                            *x += s * (dg - mean_g - yv * mean_gy);
                        }
                    }
                }
            }
            Op::Softmax(a) => {
                let y = &node.value;
                if let Some(ga) = self.acc(grads, *a) {
                    for i in 0..y.rows() {
                        let (gy, yy) = (g.row(i), y.row(i));
                        let dot: f64 = gy.iter().zip(yy).map(|(a, b)| a * b).sum();
                        for ((x, dg), yv) in ga.row_mut(i).iter_mut().zip(gy).zip(yy) {
                            *x += yv * (dg - dot);
                        }
                    }
                }
            }
            Op::CrossEntropy(a, labels, weights, probs) => {
                let up = g.item();
                if let Some(ga) = self.acc(grads, *a) {
                    for (i, (&yl, &w)) in labels.iter().zip(weights).enumerate() {
                        for (j, (x, p)) in ga.row_mut(i).iter_mut().zip(probs.row(i)).enumerate() {
                            let t = if j == yl { 1.0 } else { 0.0 };
                            *x += up * w * (p - t);
                        }
                    }
                }
            }
            Op::Sum(a) => {
                let up = g.item();
                if let Some(ga) = self.acc(grads, *a) {
                    ga.data_mut().iter_mut().for_each(|x| *x += up);
                }
            }
        }
    }

    /// Adds gradients of all bound parameters into `store`.
    pub fn accumulate_param_grads(&self, grads: &Gradients, store: &mut ParamStore) {
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Param(id) = node.op {
                if let Some(Some(g)) = grads.grads.get(i) {
                    store.get_mut(id).grad.add_assign(g);
                }
            }
        }
    }
}

pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of a tracked node; zero-shaped `None` when it did not
    /// contribute to the output.
    pub fn grad_of(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

pub fn softmax_rows(t: &Tensor) -> Tensor {
    let mut out = t.clone();
    for i in 0..t.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            z += *x;
        }
        row.iter_mut().for_each(|x| *x /= z);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn sigmoid_derivative_at_zero() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(0.0));
        let y = tape.sigmoid(x);
        let g = tape.backward(y).unwrap();
        assert_eq!(tape.value(y).item(), 0.5);
        assert_eq!(g.grad_of(x).unwrap().item(), 0.25);
    }

    #[test]
    fn layer_norm_of_constant_row_is_zero() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[vec![3.0; 5]]));
        let y = tape.layer_norm(x);
        assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scatter_sum_of_nothing_is_zero() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(0, 3));
        let y = tape.scatter_sum(x, &[], 4).unwrap();
        assert_eq!(tape.value(y), &Tensor::zeros(4, 3));
    }

    #[test]
    fn shape_errors_name_the_op() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(2, 3));
        let b = tape.constant(Tensor::zeros(2, 3));
        let err = tape.matmul(a, b).unwrap_err();
        assert_eq!(
            err.to_string(),
            "shape mismatch in matmul: (2, 3) vs (2, 3)"
        );
        let c = tape.constant(Tensor::zeros(1, 1));
        assert!(tape.concat_cols(a, c).is_err());
    }

    #[test]
    fn cross_entropy_of_uniform_logits() {
        let mut tape = Tape::new();
        let z = tape.leaf(Tensor::zeros(3, 2));
        let l = tape.cross_entropy(z, &[0, 1, 1]).unwrap();
        assert!((tape.value(l).item() - std::f64::consts::LN_2).abs() < 1e-15);
        let g = tape.backward(l).unwrap();
        let gz = g.grad_of(z).unwrap();
        assert!((gz.get(0, 0) + 1.0 / 6.0).abs() < 1e-15);
        assert!((gz.get(0, 1) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn scatter_is_adjoint_of_gather_dense() {
        // scatter_sum(x, idx) equals S x with the dense 0/1 matrix S, and its
        // backward equals S^T g.
        let idx = [2usize, 0, 2, 1, 2];
        let mut rng = crate::seed::rng(5);
        use rand::Rng;
        let xs: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..2).map(|_| rng.gen()).collect())
            .collect();
        let w: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..2).map(|_| rng.gen()).collect())
            .collect();
        let mut tape = Tape::new();
        let x = tape.leaf(t(&xs));
        let y = tape.scatter_sum(x, &idx, 3).unwrap();
        let wv = tape.constant(t(&w));
        let prod = tape.mul(y, wv).unwrap();
        let s = tape.sum(prod);
        let g = tape.backward(s).unwrap();
        for r in 0..3 {
            for c in 0..2 {
                let dense: f64 = (0..5).filter(|&i| idx[i] == r).map(|i| xs[i][c]).sum();
                assert!((tape.value(y).get(r, c) - dense).abs() < 1e-15);
            }
        }
        for i in 0..5 {
            for c in 0..2 {
                assert_eq!(g.grad_of(x).unwrap().get(i, c), w[idx[i]][c]);
            }
        }
    }
}
