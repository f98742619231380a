//! Wengert tape over [`Tensor`] values.
//!
//! Every primitive evaluates eagerly, appends a node holding its output and
//! the ids of its inputs, and returns a [`Var`] handle. Because nodes can only
//! reference earlier nodes the tape is topologically ordered by construction,
//! and [`Tape::backward`] walks it once in reverse.

use super::params::{ParamId, ParamStore};
use super::tensor::{matmul_nn_acc, matmul_nt, matmul_tn_acc};
use super::Tensor;
use crate::error::{Error, Result};

/// Smallest argument accepted by `log` and smallest divisor accepted by `div`.
pub const GUARD_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param(ParamId),
    /// x (n×k) · wᵀ with w (m×k).
    MatMulT(Var, Var),
    /// x (n×m) + b broadcast over rows.
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    /// x (n×m) scaled row-wise by c (n×1).
    MulCol(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    Square(Var),
    Tanh(Var),
    Relu(Var),
    Sin(Var),
    Cos(Var),
    Exp(Var),
    Log(Var),
    Softmax(Var),
    LogSoftmax(Var),
    SoftClamp(Var, f64),
    Concat(Vec<Var>),
    SliceCols(Var, usize),
    SumRows(Var),
    SumAll(Var),
    MeanAll(Var),
    StraightThrough(Var),
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Result of a backward pass.
#[derive(Clone, Debug)]
pub struct Gradients {
    params: Vec<Tensor>,
    nodes: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient with respect to a stored parameter; zero when unreachable.
    pub fn param(&self, id: ParamId) -> &Tensor {
        &self.params[id.index()]
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn into_params(self) -> Vec<Tensor> {
        self.params
    }

    /// Gradient flowing into an arbitrary node, if any reached it.
    pub fn var(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].as_deref()
    }

    /// Global L2 norm over all parameter gradients.
    pub fn global_norm(&self) -> f64 {
        self.params.iter().flat_map(|t| t.values()).map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.params {
            t.values_mut().iter_mut().for_each(|g| *g *= factor);
        }
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape2(rows: usize, cols: usize) -> Vec<usize> {
    vec![rows, cols]
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    fn val(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Records a constant input; non-finite data is rejected.
    pub fn constant(&mut self, t: Tensor) -> Result<Var> {
        t.ensure_finite("tape input")?;
        Ok(self.push(Op::Constant, t))
    }

    /// Records a parameter leaf holding a copy of the stored value.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var> {
        let t = store.get(id).clone();
        t.ensure_finite(store.name(id))?;
        Ok(self.push(Op::Param(id), t))
    }

    /// Stop-gradient: the value of `x` as a new constant.
    pub fn detach(&mut self, x: Var) -> Var {
        let t = self.val(x).clone();
        self.push(Op::Constant, t)
    }

    pub fn matmul_t(&mut self, x: Var, w: Var) -> Result<Var> {
        let (xv, wv) = (self.val(x), self.val(w));
        let (n, k, m) = (xv.rows(), xv.cols(), wv.rows());
        if wv.cols() != k {
            return Err(Error::Shape(format!("matmul: input has {k} columns, weight expects {}", wv.cols())));
        }
        let mut out = vec![0.0; n * m];
        matmul_nt(xv.values(), wv.values(), n, k, m, &mut out);
        Ok(self.push(Op::MatMulT(x, w), Tensor::from_parts(shape2(n, m), out)))
    }

    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xv, bv) = (self.val(x), self.val(b));
        let m = xv.cols();
        if bv.len() != m {
            return Err(Error::Shape(format!("bias has {} values for {m} columns", bv.len())));
        }
        let mut out = xv.values().to_vec();
        for row in out.chunks_mut(m.max(1)) {
            for (o, b) in row.iter_mut().zip(bv.values()) {
                *o += b;
            }
        }
        let shape = xv.shape().to_vec();
        Ok(self.push(Op::AddRow(x, b), Tensor::from_parts(shape, out)))
    }

    /// `x · wᵀ + b`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let h = self.matmul_t(x, w)?;
        self.add_row(h, b)
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        let (av, bv) = (self.val(a), self.val(b));
        if av.rows() != bv.rows() || av.cols() != bv.cols() {
            return Err(Error::Shape(format!("{what}: {:?} vs {:?}", av.shape(), bv.shape())));
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64, what: &str) -> Result<Var> {
        self.same_shape(a, b, what)?;
        let (av, bv) = (self.val(a), self.val(b));
        let out: Vec<f64> = av.values().iter().zip(bv.values()).map(|(x, y)| f(*x, *y)).collect();
        let shape = av.shape().to_vec();
        Ok(self.push(op, Tensor::from_parts(shape, out)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, Op::Add(a, b), |x, y| x + y, "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y, "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y, "mul")
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        if let Some(d) = self.val(b).values().iter().find(|d| d.abs() < GUARD_EPS) {
            return Err(Error::Numeric(format!("division by {d:e}")));
        }
        self.zip_with(a, b, Op::Div(a, b), |x, y| x / y, "div")
    }

    /// Scales each row of `x` (n×m) by the matching entry of `c` (n×1).
    pub fn mul_col(&mut self, x: Var, c: Var) -> Result<Var> {
        let (xv, cv) = (self.val(x), self.val(c));
        let (n, m) = (xv.rows(), xv.cols());
        if cv.len() != n {
            return Err(Error::Shape(format!("mul_col: {} scales for {n} rows", cv.len())));
        }
        let mut out = xv.values().to_vec();
        for (row, s) in out.chunks_mut(m.max(1)).zip(cv.values()) {
            row.iter_mut().for_each(|v| *v *= s);
        }
        let shape = xv.shape().to_vec();
        Ok(self.push(Op::MulCol(x, c), Tensor::from_parts(shape, out)))
    }

    fn map(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let xv = self.val(x);
        let out: Vec<f64> = xv.values().iter().map(|v| f(*v)).collect();
        let shape = xv.shape().to_vec();
        self.push(op, Tensor::from_parts(shape, out))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        self.map(x, Op::Scale(x, factor), |v| v * factor)
    }

    pub fn offset(&mut self, x: Var, c: f64) -> Var {
        self.map(x, Op::Offset(x), |v| v + c)
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.map(x, Op::Square(x), |v| v * v)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map(x, Op::Tanh(x), f64::tanh)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map(x, Op::Relu(x), |v| v.max(0.0))
    }

    pub fn sin(&mut self, x: Var) -> Var {
        self.map(x, Op::Sin(x), f64::sin)
    }

    pub fn cos(&mut self, x: Var) -> Var {
        self.map(x, Op::Cos(x), f64::cos)
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        let y = self.map(x, Op::Exp(x), f64::exp);
        self.val(y).ensure_finite("exp overflow")?;
        Ok(y)
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        if let Some(v) = self.val(x).values().iter().find(|v| !(**v >= GUARD_EPS)) {
            return Err(Error::Numeric(format!("log of {v:e}")));
        }
        Ok(self.map(x, Op::Log(x), f64::ln))
    }

    /// Smooth bound `b·tanh(x/b)`, mapping ℝ into (−b, b) with unit slope at 0.
    pub fn soft_clamp(&mut self, x: Var, bound: f64) -> Var {
        self.map(x, Op::SoftClamp(x, bound), |v| bound * (v / bound).tanh())
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax(&mut self, x: Var) -> Var {
        let xv = self.val(x);
        let m = xv.cols();
        let mut out = xv.values().to_vec();
        for row in out.chunks_mut(m.max(1)) {
            softmax_in_place(row);
        }
        let shape = xv.shape().to_vec();
        self.push(Op::Softmax(x), Tensor::from_parts(shape, out))
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, x: Var) -> Var {
        let xv = self.val(x);
        let m = xv.cols();
        let mut out = xv.values().to_vec();
        for row in out.chunks_mut(m.max(1)) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            row.iter_mut().for_each(|v| *v -= lse);
        }
        let shape = xv.shape().to_vec();
        self.push(Op::LogSoftmax(x), Tensor::from_parts(shape, out))
    }

    /// Column-wise concatenation of tensors with equal row counts.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or_else(|| Error::Shape("concat of nothing".into()))?;
        let n = self.val(*first).rows();
        let widths: Vec<usize> = parts.iter().map(|p| self.val(*p).cols()).collect();
        for p in parts {
            if self.val(*p).rows() != n {
                return Err(Error::Shape(format!("concat: row counts {} and {}", n, self.val(*p).rows())));
            }
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(n * total);
        for r in 0..n {
            for p in parts {
                out.extend_from_slice(self.val(*p).row(r));
            }
        }
        let shape = if self.val(*first).shape().len() == 2 { shape2(n, total) } else { vec![total] };
        Ok(self.push(Op::Concat(parts.to_vec()), Tensor::from_parts(shape, out)))
    }

    /// Columns `start..start + len` of `x`.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.val(x);
        let (n, m) = (xv.rows(), xv.cols());
        if start + len > m {
            return Err(Error::Shape(format!("slice {start}..{} of {m} columns", start + len)));
        }
        let mut out = Vec::with_capacity(n * len);
        for r in 0..n {
            out.extend_from_slice(&xv.row(r)[start..start + len]);
        }
        Ok(self.push(Op::SliceCols(x, start), Tensor::from_parts(shape2(n, len), out)))
    }

    /// Sum over the last axis, giving n×1.
    pub fn sum_rows(&mut self, x: Var) -> Var {
        let xv = self.val(x);
        let (n, m) = (xv.rows(), xv.cols());
        let out: Vec<f64> = (0..n).map(|r| xv.values()[r * m..(r + 1) * m].iter().sum()).collect();
        self.push(Op::SumRows(x), Tensor::from_parts(shape2(n, 1), out))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s: f64 = self.val(x).values().iter().sum();
        self.push(Op::SumAll(x), Tensor::scalar(s))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let xv = self.val(x);
        let s: f64 = xv.values().iter().sum::<f64>() / xv.len() as f64;
        self.push(Op::MeanAll(x), Tensor::scalar(s))
    }

    /// Forwards `hard` but routes the incoming gradient to `soft` unchanged.
    pub fn straight_through(&mut self, soft: Var, hard: Tensor) -> Result<Var> {
        let sv = self.val(soft);
        if sv.rows() != hard.rows() || sv.cols() != hard.cols() {
            return Err(Error::Shape(format!("straight-through: {:?} vs {:?}", sv.shape(), hard.shape())));
        }
        hard.ensure_finite("straight-through")?;
        Ok(self.push(Op::StraightThrough(soft), hard))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var, store: &ParamStore) -> Result<Gradients> {
        let lv = self.val(loss);
        if lv.len() != 1 {
            return Err(Error::Contract(format!("backward needs a scalar loss, got shape {:?}", lv.shape())));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut params: Vec<Tensor> = store.ids().map(|id| Tensor::zeros(store.get(id).shape())).collect();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let out = &node.value;
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    for (p, d) in params[id.index()].values_mut().iter_mut().zip(&g) {
                        *p += d;
                    }
                }
                Op::MatMulT(x, w) => {
                    let (xv, wv) = (self.val(*x), self.val(*w));
                    let (n, k, m) = (xv.rows(), xv.cols(), wv.rows());
                    matmul_nn_acc(&g, wv.values(), n, m, k, acc(&mut grads, *x, n * k));
                    matmul_tn_acc(&g, xv.values(), n, m, k, acc(&mut grads, *w, m * k));
                }
                Op::AddRow(x, b) => {
                    let m = self.val(*x).cols().max(1);
                    add_into(acc(&mut grads, *x, g.len()), &g);
                    let gb = acc(&mut grads, *b, m);
                    for row in g.chunks(m) {
                        add_into(gb, row);
                    }
                }
                Op::Add(a, b) => {
                    add_into(acc(&mut grads, *a, g.len()), &g);
                    add_into(acc(&mut grads, *b, g.len()), &g);
                }
                Op::Sub(a, b) => {
                    add_into(acc(&mut grads, *a, g.len()), &g);
                    let gb = acc(&mut grads, *b, g.len());
                    gb.iter_mut().zip(&g).for_each(|(o, d)| *o -= d);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.val(*a).values(), self.val(*b).values());
                    let ga = acc(&mut grads, *a, g.len());
                    for i in 0..g.len() {
                        ga[i] += g[i] * bv[i];
                    }
                    let gb = acc(&mut grads, *b, g.len());
                    for i in 0..g.len() {
                        gb[i] += g[i] * av[i];
                    }
                }
                Op::Div(a, b) => {
                    let bv = self.val(*b).values();
                    let ga = acc(&mut grads, *a, g.len());
                    for i in 0..g.len() {
                        ga[i] += g[i] / bv[i];
                    }
                    let ov = out.values();
                    let gb = acc(&mut grads, *b, g.len());
                    for i in 0..g.len() {
                        gb[i] -= g[i] * ov[i] / bv[i];
                    }
                }
                Op::MulCol(x, c) => {
                    let (xv, cv) = (self.val(*x), self.val(*c));
                    let m = xv.cols().max(1);
                    let gx = acc(&mut grads, *x, g.len());
                    for (r, (grow, s)) in g.chunks(m).zip(cv.values()).enumerate() {
                        for (j, d) in grow.iter().enumerate() {
                            gx[r * m + j] += d * s;
                        }
                    }
                    let gc = acc(&mut grads, *c, cv.len());
                    for (r, (grow, xrow)) in g.chunks(m).zip(xv.values().chunks(m)).enumerate() {
                        gc[r] += grow.iter().zip(xrow).map(|(d, v)| d * v).sum::<f64>();
                    }
                }
                Op::Scale(x, f) => {
                    let gx = acc(&mut grads, *x, g.len());
                    gx.iter_mut().zip(&g).for_each(|(o, d)| *o += d * f);
                }
                Op::Offset(x) | Op::StraightThrough(x) => add_into(acc(&mut grads, *x, g.len()), &g),
                Op::Square(x) => {
                    let xv = self.val(*x).values();
                    let gx = acc(&mut grads, *x, g.len());
                    for i in 0..g.len() {
                        gx[i] += 2.0 * xv[i] * g[i];
                    }
                }
                Op::Tanh(x) => {
                    let ov = out.values();
                    let gx = acc(&mut grads, *x, g.len());
                    for i in 0..g.len() {
                        gx[i] += g[i] * (1.0 - ov[i] * ov[i]);
                    }
                }
                Op::Relu(x) => {
                    let xv = self.val(*x).values();
                    let gx = acc(&mut grads, *x, g.len());
                    for i in 0..g.len() {
                        if xv[i] > 0.0 {
                            gx[i] += g[i];
                        }
                    }
                }
                Op::Sin(x) => {
                    let xv = self.val(*x).values();
                    let gx = acc(&mut grads, *x, g.len());
                    for i in 0..g.len() {
                        gx[i] += g[i] * xv[i].cos();
                    }
                }
                Op::Cos(x) => {
                    let xv = self.val(*x).values();
                    let gx = acc(&mut grads, *x, g.len());
                    for i in 0..g.len() {
                        gx[i] -= g[i] * xv[i].sin();
                    }
                }
                Op::Exp(x) => {
                    let ov = out.values();
                    let gx = acc(&mut grads, *x, g.len());
                    for i in 0..g.len() {
                        gx[i] += g[i] * ov[i];
                    }
                }
                Op::Log(x) => {
                    let xv = self.val(*x).values();
                    let gx = acc(&mut grads, *x, g.len());
                    for i in 0..g.len() {
                        gx[i] += g[i] / xv[i];
                    }
                }
                Op::SoftClamp(x, bound) => {
                    let ov = out.values();
                    let gx = acc(&mut grads, *x, g.len());
                    for i in 0..g.len() {
                        let t = ov[i] / bound;
                        gx[i] += g[i] * (1.0 - t * t);
                    }
                }
                Op::Softmax(x) => {
                    let m = out.cols().max(1);
                    let gx = acc(&mut grads, *x, g.len());
                    for ((grow, prow), orow) in g.chunks(m).zip(out.values().chunks(m)).zip(gx.chunks_mut(m)) {
                        let dot: f64 = grow.iter().zip(prow).map(|(d, p)| d * p).sum();
                        for j in 0..m {
                            orow[j] += prow[j] * (grow[j] - dot);
                        }
                    }
                }
                Op::LogSoftmax(x) => {
                    let m = out.cols().max(1);
                    let gx = acc(&mut grads, *x, g.len());
                    for ((grow, lrow), orow) in g.chunks(m).zip(out.values().chunks(m)).zip(gx.chunks_mut(m)) {
                        let total: f64 = grow.iter().sum();
                        for j in 0..m {
                            orow[j] += grow[j] - lrow[j].exp() * total;
                        }
                    }
                }
                Op::Concat(parts) => {
                    let total = out.cols();
                    let n = out.rows();
                    let mut offset = 0;
                    for p in parts {
                        let w = self.val(*p).cols();
                        let gp = acc(&mut grads, *p, n * w);
                        for r in 0..n {
                            add_into(&mut gp[r * w..(r + 1) * w], &g[r * total + offset..r * total + offset + w]);
                        }
                        offset += w;
                    }
                }
                Op::SliceCols(x, start) => {
                    let xv = self.val(*x);
                    let (n, m) = (xv.rows(), xv.cols());
                    let w = out.cols();
                    let gx = acc(&mut grads, *x, n * m);
                    for r in 0..n {
                        add_into(&mut gx[r * m + start..r * m + start + w], &g[r * w..(r + 1) * w]);
                    }
                }
                Op::SumRows(x) => {
                    let xv = self.val(*x);
                    let m = xv.cols().max(1);
                    let gx = acc(&mut grads, *x, xv.len());
                    for (row, d) in gx.chunks_mut(m).zip(&g) {
                        row.iter_mut().for_each(|o| *o += d);
                    }
                }
                Op::SumAll(x) => {
                    let len = self.val(*x).len();
                    acc(&mut grads, *x, len).iter_mut().for_each(|o| *o += g[0]);
                }
                Op::MeanAll(x) => {
                    let len = self.val(*x).len();
                    let d = g[0] / len as f64;
                    acc(&mut grads, *x, len).iter_mut().for_each(|o| *o += d);
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { params, nodes: grads })
    }
}

fn acc(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

/// Max-subtracted softmax of a slice, in place.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}
