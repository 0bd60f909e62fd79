//! Operation record and reverse sweep.
//!
//! Nodes are appended in execution order, so inputs always precede their
//! consumers and a single reverse pass over the vector visits every node once.
//! Binary elementwise ops broadcast the right operand when it is a `1 x c`
//! row, an `r x 1` column or a `1 x 1` scalar.

use crate::error::{DiffError, Result};
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Neg(Var),
    Scale(Var, f64),
    AddScalar(Var),
    ConcatCols(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    ScatterAddRows(Var, Vec<usize>),
    Sigmoid(Var),
    Relu(Var),
    Exp(Var),
    Log(Var),
    LogSigmoid(Var),
    Powf(Var, f64),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    LogSumExpRowsMasked(Var, Vec<bool>),
    Diag(Var),
    Sum(Var),
    Mean(Var),
    SumOverRows(Var),
    SumOverCols(Var),
    Element(Var, usize, usize),
    MaxAbsNormalize(Var, usize),
    L2NormalizeRows(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    tracked: bool,
}

/// Single-threaded record of primitive applications.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients of a scalar loss with respect to recorded leaves.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<[usize; 2]>,
}

impl Gradients {
    /// Gradient for `var`; exact zeros when the loss does not depend on it.
    pub fn get(&self, var: Var) -> Tensor {
        match self.grads.get(var.0).and_then(Option::as_ref) {
            Some(g) => g.clone(),
            None => {
                let [r, c] = self.shapes[var.0];
                Tensor::zeros(r, c)
            }
        }
    }

    pub fn get_all(&self, vars: &[Var]) -> Vec<Tensor> {
        vars.iter().map(|&v| self.get(v)).collect()
    }
}

fn broadcast_ok(lhs: [usize; 2], rhs: [usize; 2]) -> bool {
    (rhs[0] == lhs[0] || rhs[0] == 1) && (rhs[1] == lhs[1] || rhs[1] == 1)
}

#[inline]
fn bidx(r: usize, c: usize, shape: [usize; 2]) -> usize {
    let rr = if shape[0] == 1 { 0 } else { r };
    let cc = if shape[1] == 1 { 0 } else { c };
    rr * shape[1] + cc
}

/// Sums a full-shape gradient down to a (possibly broadcast) operand shape.
fn reduce_to(grad: &Tensor, shape: [usize; 2]) -> Tensor {
    if grad.shape() == shape {
        return grad.clone();
    }
    let mut out = Tensor::zeros(shape[0], shape[1]);
    let [r, c] = grad.shape();
    let od = out.data_mut();
    let gd = grad.data();
    for i in 0..r {
        for j in 0..c {
            od[bidx(i, j, shape)] += gd[i * c + j];
        }
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(sigmoid(x))` without overflow.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn softmax_row(row: &[f64], out: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &v) in out.iter_mut().zip(row) {
        *o = (v - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
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

    /// Differentiable input (parameter or input being checked).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push_raw(value, Op::Leaf, true)
    }

    /// Input excluded from differentiation; its gradient is always zero.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_raw(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> [usize; 2] {
        self.nodes[var.0].value.shape()
    }

    fn push_raw(&mut self, value: Tensor, op: Op, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn check(&self, vars: &[Var]) -> Result<()> {
        if self.consumed {
            return Err(DiffError::TapeConsumed);
        }
        if vars.iter().any(|v| v.0 >= self.nodes.len()) {
            return Err(DiffError::ForeignVar);
        }
        Ok(())
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(DiffError::NonFinite { op: name });
        }
        let tracked = inputs.iter().any(|v| self.nodes[v.0].tracked);
        Ok(self.push_raw(value, op, tracked))
    }

    fn unary(
        &mut self,
        name: &'static str,
        a: Var,
        f: impl Fn(f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        self.check(&[a])?;
        let out = self.value(a).map(f);
        self.push(name, out, op, &[a])
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        self.check(&[a, b])?;
        let (sa, sb) = (self.shape(a), self.shape(b));
        if !broadcast_ok(sa, sb) {
            return Err(DiffError::ShapeMismatch {
                op: name,
                left: sa,
                right: sb,
            });
        }
        let av = self.value(a);
        let bv = self.value(b);
        let mut out = Tensor::zeros(sa[0], sa[1]);
        {
            let od = out.data_mut();
            let (ad, bd) = (av.data(), bv.data());
            if sa == sb {
                for ((o, &x), &y) in od.iter_mut().zip(ad).zip(bd) {
                    *o = f(x, y);
                }
            } else {
                for i in 0..sa[0] {
                    for j in 0..sa[1] {
                        let k = i * sa[1] + j;
                        od[k] = f(ad[k], bd[bidx(i, j, sb)]);
                    }
                }
            }
        }
        self.push(name, out, op, &[a, b])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(&[a, b])?;
        let out = self.value(a).matmul(self.value(b))?;
        self.push("matmul", out, Op::MatMul(a, b), &[a, b])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.check(&[a])?;
        let out = self.value(a).transpose();
        self.push("transpose", out, Op::Transpose(a), &[a])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.unary("neg", a, |x| -x, Op::Neg(a))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        self.unary("scale", a, |x| x * factor, Op::Scale(a, factor))
    }

    pub fn add_scalar(&mut self, a: Var, offset: f64) -> Result<Var> {
        self.unary("add_scalar", a, |x| x + offset, Op::AddScalar(a))
    }

    /// Concatenation along the feature (column) axis.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        self.check(parts)?;
        let Some(&first) = parts.first() else {
            return Ok(self.push_raw(Tensor::zeros(0, 0), Op::ConcatCols(Vec::new()), false));
        };
        let rows = self.shape(first)[0];
        for &p in parts {
            if self.shape(p)[0] != rows {
                return Err(DiffError::ShapeMismatch {
                    op: "concat_cols",
                    left: self.shape(first),
                    right: self.shape(p),
                });
            }
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p)[1]).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let out = Tensor::new(rows, cols, data)?;
        self.push("concat_cols", out, Op::ConcatCols(parts.to_vec()), parts)
    }

    /// `out[i] = a[index[i]]`.
    pub fn gather_rows(&mut self, a: Var, index: &[usize]) -> Result<Var> {
        self.check(&[a])?;
        let rows = self.shape(a)[0];
        if let Some(&bad) = index.iter().find(|&&i| i >= rows) {
            return Err(DiffError::IndexOutOfRange {
                op: "gather_rows",
                index: bad,
                bound: rows,
            });
        }
        let out = self.value(a).select_rows(index);
        self.push("gather_rows", out, Op::GatherRows(a, index.to_vec()), &[a])
    }

    /// `out[index[i]] += a[i]` into an `out_rows x cols` zero tensor.
    pub fn scatter_add_rows(&mut self, a: Var, index: &[usize], out_rows: usize) -> Result<Var> {
        self.check(&[a])?;
        let [rows, cols] = self.shape(a);
        if index.len() != rows {
            return Err(DiffError::ShapeMismatch {
                op: "scatter_add_rows",
                left: [rows, cols],
                right: [index.len(), 1],
            });
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= out_rows) {
            return Err(DiffError::IndexOutOfRange {
                op: "scatter_add_rows",
                index: bad,
                bound: out_rows,
            });
        }
        let mut out = Tensor::zeros(out_rows, cols);
        {
            let src = self.value(a).data();
            let od = out.data_mut();
            for (i, &t) in index.iter().enumerate() {
                let dst = &mut od[t * cols..(t + 1) * cols];
                for (o, &v) in dst.iter_mut().zip(&src[i * cols..(i + 1) * cols]) {
                    *o += v;
                }
            }
        }
        self.push(
            "scatter_add_rows",
            out,
            Op::ScatterAddRows(a, index.to_vec()),
            &[a],
        )
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary("sigmoid", a, sigmoid, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary("relu", a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary("exp", a, f64::exp, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary("log", a, f64::ln, Op::Log(a))
    }

    /// `log(sigmoid(a))`, stable for large `|a|`.
    pub fn log_sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary("log_sigmoid", a, log_sigmoid, Op::LogSigmoid(a))
    }

    pub fn powf(&mut self, a: Var, exponent: f64) -> Result<Var> {
        self.unary("powf", a, |x| x.powf(exponent), Op::Powf(a, exponent))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        self.check(&[a])?;
        let av = self.value(a);
        let [r, c] = av.shape();
        let mut out = Tensor::zeros(r, c);
        for i in 0..r {
            softmax_row(av.row_slice(i), &mut out.data_mut()[i * c..(i + 1) * c]);
        }
        self.push("softmax_rows", out, Op::SoftmaxRows(a), &[a])
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Result<Var> {
        self.check(&[a])?;
        let av = self.value(a);
        let [r, c] = av.shape();
        let mut out = Tensor::zeros(r, c);
        for i in 0..r {
            let row = av.row_slice(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            for (o, &v) in out.data_mut()[i * c..(i + 1) * c].iter_mut().zip(row) {
                *o = v - lse;
            }
        }
        self.push("log_softmax_rows", out, Op::LogSoftmaxRows(a), &[a])
    }

    /// Per-row `log sum_j exp(a[i][j])` over entries where `mask` (row-major,
    /// same shape as `a`) is true. Output is `r x 1`.
    pub fn logsumexp_rows_masked(&mut self, a: Var, mask: &[bool]) -> Result<Var> {
        self.check(&[a])?;
        let av = self.value(a);
        let [r, c] = av.shape();
        if mask.len() != r * c {
            return Err(DiffError::ShapeMismatch {
                op: "logsumexp_rows_masked",
                left: [r, c],
                right: [mask.len(), 1],
            });
        }
        let mut out = Vec::with_capacity(r);
        for i in 0..r {
            let row = av.row_slice(i);
            let m = &mask[i * c..(i + 1) * c];
            let max = row
                .iter()
                .zip(m)
                .filter(|(_, &keep)| keep)
                .map(|(&v, _)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = row
                .iter()
                .zip(m)
                .filter(|(_, &keep)| keep)
                .map(|(&v, _)| (v - max).exp())
                .sum();
            out.push(max + total.ln());
        }
        let out = Tensor::column(out);
        self.push(
            "logsumexp_rows_masked",
            out,
            Op::LogSumExpRowsMasked(a, mask.to_vec()),
            &[a],
        )
    }

    /// Diagonal of a square matrix as an `n x 1` column.
    pub fn diag(&mut self, a: Var) -> Result<Var> {
        self.check(&[a])?;
        let [r, c] = self.shape(a);
        if r != c {
            return Err(DiffError::ShapeMismatch {
                op: "diag",
                left: [r, c],
                right: [c, r],
            });
        }
        let av = self.value(a);
        let out = Tensor::column((0..r).map(|i| av.get(i, i)).collect());
        self.push("diag", out, Op::Diag(a), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.check(&[a])?;
        let out = Tensor::scalar(self.value(a).sum());
        self.push("sum", out, Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.check(&[a])?;
        let v = self.value(a);
        let out = Tensor::scalar(v.sum() / v.len() as f64);
        self.push("mean", out, Op::Mean(a), &[a])
    }

    /// Column sums: `r x c -> 1 x c`.
    pub fn sum_over_rows(&mut self, a: Var) -> Result<Var> {
        self.check(&[a])?;
        let av = self.value(a);
        let [r, c] = av.shape();
        let mut out = vec![0.0; c];
        for i in 0..r {
            for (o, v) in out.iter_mut().zip(av.row_slice(i)) {
                *o += v;
            }
        }
        self.push("sum_over_rows", Tensor::row(out), Op::SumOverRows(a), &[a])
    }

    /// Row sums: `r x c -> r x 1`.
    pub fn sum_over_cols(&mut self, a: Var) -> Result<Var> {
        self.check(&[a])?;
        let av = self.value(a);
        let out: Vec<f64> = (0..av.rows()).map(|i| av.row_slice(i).iter().sum()).collect();
        self.push("sum_over_cols", Tensor::column(out), Op::SumOverCols(a), &[a])
    }

    /// Single entry as a `1 x 1` tensor.
    pub fn element(&mut self, a: Var, row: usize, col: usize) -> Result<Var> {
        self.check(&[a])?;
        let [r, c] = self.shape(a);
        if row >= r || col >= c {
            return Err(DiffError::IndexOutOfRange {
                op: "element",
                index: row * c + col,
                bound: r * c,
            });
        }
        let out = Tensor::scalar(self.value(a).get(row, col));
        self.push("element", out, Op::Element(a, row, col), &[a])
    }

    /// Divides every entry by the largest absolute entry.
    pub fn max_abs_normalize(&mut self, a: Var) -> Result<Var> {
        self.check(&[a])?;
        let av = self.value(a);
        let mut arg = 0;
        for (i, v) in av.data().iter().enumerate() {
            if v.abs() > av.data()[arg].abs() {
                arg = i;
            }
        }
        let denom = av.data().get(arg).map_or(0.0, |v| v.abs());
        let out = av.map(|v| v / denom);
        self.push("max_abs_normalize", out, Op::MaxAbsNormalize(a, arg), &[a])
    }

    /// Divides each row by its Euclidean norm.
    pub fn l2_normalize_rows(&mut self, a: Var) -> Result<Var> {
        self.check(&[a])?;
        let av = self.value(a);
        let [r, c] = av.shape();
        let mut out = Tensor::zeros(r, c);
        for i in 0..r {
            let row = av.row_slice(i);
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            for (o, v) in out.data_mut()[i * c..(i + 1) * c].iter_mut().zip(row) {
                *o = v / norm;
            }
        }
        self.push("l2_normalize_rows", out, Op::L2NormalizeRows(a), &[a])
    }

    /// Reverse sweep from a `1 x 1` loss. Consumes the tape: further ops and
    /// a second backward call fail with [`DiffError::TapeConsumed`].
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        self.check(&[loss])?;
        let shape = self.shape(loss);
        if shape != [1, 1] {
            return Err(DiffError::NotScalar { shape });
        }
        self.consumed = true;
        let n = self.nodes.len();
        let shapes: Vec<[usize; 2]> = self.nodes.iter().map(|nd| nd.value.shape()).collect();
        let mut grads: Vec<Option<Tensor>> = vec![None; n];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.tracked || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.backprop_node(idx, &g, &mut grads)?;
        }
        Ok(Gradients { grads, shapes })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], var: Var, g: Tensor) {
        if !self.nodes[var.0].tracked {
            return;
        }
        match &mut grads[var.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn backprop_node(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let node = &self.nodes[idx];
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.nodes[a.0].tracked {
                    let ga = g.matmul(&bv.transpose())?;
                    self.accumulate(grads, *a, ga);
                }
                if self.nodes[b.0].tracked {
                    let gb = av.transpose().matmul(g)?;
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Transpose(a) => self.accumulate(grads, *a, g.transpose()),
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, reduce_to(g, self.shape(*b)));
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, reduce_to(&g.map(|v| -v), self.shape(*b)));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (sa, sb) = (av.shape(), bv.shape());
                let mut ga = Tensor::zeros(sa[0], sa[1]);
                let mut gb_full = Tensor::zeros(sa[0], sa[1]);
                {
                    let (gad, gbd) = (ga.data_mut(), gb_full.data_mut());
                    let (ad, bd, gd) = (av.data(), bv.data(), g.data());
                    for i in 0..sa[0] {
                        for j in 0..sa[1] {
                            let k = i * sa[1] + j;
                            gad[k] = gd[k] * bd[bidx(i, j, sb)];
                            gbd[k] = gd[k] * ad[k];
                        }
                    }
                }
                self.accumulate(grads, *a, ga);
                self.accumulate(grads, *b, reduce_to(&gb_full, sb));
            }
            Op::Neg(a) => self.accumulate(grads, *a, g.map(|v| -v)),
            Op::Scale(a, s) => {
                let s = *s;
                self.accumulate(grads, *a, g.map(|v| v * s));
            }
            Op::AddScalar(a) => self.accumulate(grads, *a, g.clone()),
            Op::ConcatCols(parts) => {
                let rows = g.rows();
                let mut offset = 0;
                for &p in parts {
                    let pc = self.shape(p)[1];
                    let mut gp = Vec::with_capacity(rows * pc);
                    for r in 0..rows {
                        gp.extend_from_slice(&g.row_slice(r)[offset..offset + pc]);
                    }
                    offset += pc;
                    self.accumulate(grads, p, Tensor::new(rows, pc, gp)?);
                }
            }
            Op::GatherRows(a, index) => {
                let [rows, cols] = self.shape(*a);
                let mut ga = Tensor::zeros(rows, cols);
                let gad = ga.data_mut();
                for (i, &t) in index.iter().enumerate() {
                    for (o, v) in gad[t * cols..(t + 1) * cols].iter_mut().zip(g.row_slice(i)) {
                        *o += v;
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::ScatterAddRows(a, index) => {
                self.accumulate(grads, *a, g.select_rows(index));
            }
            Op::Sigmoid(a) => {
                let ga = zip_map(g, y, |gv, yv| gv * yv * (1.0 - yv));
                self.accumulate(grads, *a, ga);
            }
            Op::Relu(a) => {
                let ga = zip_map(g, self.value(*a), |gv, x| if x > 0.0 { gv } else { 0.0 });
                self.accumulate(grads, *a, ga);
            }
            Op::Exp(a) => self.accumulate(grads, *a, zip_map(g, y, |gv, yv| gv * yv)),
            Op::Log(a) => {
                let ga = zip_map(g, self.value(*a), |gv, x| gv / x);
                self.accumulate(grads, *a, ga);
            }
            Op::LogSigmoid(a) => {
                let ga = zip_map(g, self.value(*a), |gv, x| gv * sigmoid(-x));
                self.accumulate(grads, *a, ga);
            }
            Op::Powf(a, e) => {
                let e = *e;
                let ga = zip_map(g, self.value(*a), |gv, x| gv * e * x.powf(e - 1.0));
                self.accumulate(grads, *a, ga);
            }
            Op::SoftmaxRows(a) => {
                let [r, c] = y.shape();
                let mut ga = Tensor::zeros(r, c);
                for i in 0..r {
                    let (yr, gr) = (y.row_slice(i), g.row_slice(i));
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for (j, o) in ga.data_mut()[i * c..(i + 1) * c].iter_mut().enumerate() {
                        *o = yr[j] * (gr[j] - dot);
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::LogSoftmaxRows(a) => {
                let [r, c] = y.shape();
                let mut ga = Tensor::zeros(r, c);
                for i in 0..r {
                    let (yr, gr) = (y.row_slice(i), g.row_slice(i));
                    let total: f64 = gr.iter().sum();
                    for (j, o) in ga.data_mut()[i * c..(i + 1) * c].iter_mut().enumerate() {
                        *o = gr[j] - yr[j].exp() * total;
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::LogSumExpRowsMasked(a, mask) => {
                let av = self.value(*a);
                let [r, c] = av.shape();
                let mut ga = Tensor::zeros(r, c);
                for i in 0..r {
                    let lse = y.get(i, 0);
                    let gi = g.get(i, 0);
                    for j in 0..c {
                        if mask[i * c + j] {
                            ga.set(i, j, gi * (av.get(i, j) - lse).exp());
                        }
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::Diag(a) => {
                let n = self.shape(*a)[0];
                let mut ga = Tensor::zeros(n, n);
                for i in 0..n {
                    ga.set(i, i, g.get(i, 0));
                }
                self.accumulate(grads, *a, ga);
            }
            Op::Sum(a) => {
                let [r, c] = self.shape(*a);
                self.accumulate(grads, *a, Tensor::full(r, c, g.item()));
            }
            Op::Mean(a) => {
                let [r, c] = self.shape(*a);
                let n = (r * c) as f64;
                self.accumulate(grads, *a, Tensor::full(r, c, g.item() / n));
            }
            Op::SumOverRows(a) => {
                let [r, c] = self.shape(*a);
                let mut ga = Tensor::zeros(r, c);
                for i in 0..r {
                    ga.data_mut()[i * c..(i + 1) * c].copy_from_slice(g.data());
                }
                self.accumulate(grads, *a, ga);
            }
            Op::SumOverCols(a) => {
                let [r, c] = self.shape(*a);
                let mut ga = Tensor::zeros(r, c);
                for i in 0..r {
                    let gi = g.get(i, 0);
                    ga.data_mut()[i * c..(i + 1) * c].fill(gi);
                }
                self.accumulate(grads, *a, ga);
            }
            Op::Element(a, row, col) => {
                let [r, c] = self.shape(*a);
                let mut ga = Tensor::zeros(r, c);
                ga.set(*row, *col, g.item());
                self.accumulate(grads, *a, ga);
            }
            Op::MaxAbsNormalize(a, arg) => {
                let av = self.value(*a);
                let xk = av.data()[*arg];
                let m = xk.abs();
                let dot: f64 = g.data().iter().zip(av.data()).map(|(a, b)| a * b).sum();
                let mut ga = g.map(|gv| gv / m);
                ga.data_mut()[*arg] -= dot * xk.signum() / (m * m);
                self.accumulate(grads, *a, ga);
            }
            Op::L2NormalizeRows(a) => {
                let av = self.value(*a);
                let [r, c] = av.shape();
                let mut ga = Tensor::zeros(r, c);
                for i in 0..r {
                    let norm = av.row_slice(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                    let (yr, gr) = (y.row_slice(i), g.row_slice(i));
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for (j, o) in ga.data_mut()[i * c..(i + 1) * c].iter_mut().enumerate() {
                        *o = (gr[j] - yr[j] * dot) / norm;
                    }
                }
                self.accumulate(grads, *a, ga);
            }
        }
        Ok(())
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let [r, c] = a.shape();
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(r, c, data).expect("same shape")
}
