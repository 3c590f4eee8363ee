use rand::Rng;

use super::params::{Gradients, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::tensor::{matmul_into, NDArray};

static EMPTY_STORE: ParamStore = ParamStore::new();

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// How the right operand of a binary elementwise op is broadcast.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Bcast {
    Same,
    /// `[1, n]` against `[m, n]`
    Row,
    /// `[1, 1]` against anything
    Scalar,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var, Bcast),
    Sub(Var, Var, Bcast),
    Mul(Var, Var, Bcast),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    SoftmaxRows(Var),
    LayerNorm(Var, Vec<f64>),
    Gather(Var, Vec<usize>),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    ReverseRows(Var),
    Window {
        x: Var,
        width: usize,
        pad_left: usize,
    },
    MaxRows(Var, Vec<usize>),
    SumAll(Var),
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: NDArray,
    },
}

enum Value {
    Owned(NDArray),
    Param(ParamId),
}

struct Node {
    value: Value,
    op: Op,
}

/// Record of differentiable operations for one reverse-mode pass.
///
/// Operations are evaluated eagerly; every result is checked for NaN/Inf.
/// A tape is single-threaded. Independent tapes over the same
/// [`ParamStore`] may run on separate threads.
pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
    consumed: bool,
}

impl Tape<'static> {
    /// A tape with no parameters, for constant-only expressions.
    pub fn detached() -> Self {
        Tape::new(&EMPTY_STORE)
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            param_vars: vec![None; params.len()],
            consumed: false,
        }
    }

    pub fn store(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &NDArray {
        match &self.nodes[v.0].value {
            Value::Owned(a) => a,
            Value::Param(id) => self.params.get(*id),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    fn push(&mut self, op_name: &'static str, value: NDArray, op: Op) -> Result<Var> {
        if !value.all_finite() {
            return Err(Error::NonFinite { op: op_name });
        }
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: NDArray) -> Result<Var> {
        self.push("constant", value, Op::Leaf)
    }

    /// Leaf for a stored parameter. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        self.nodes.push(Node {
            value: Value::Param(id),
            op: Op::Param(id),
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        self.push("matmul", out, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose();
        self.push("transpose", out, Op::Transpose(a))
    }

    fn bcast_kind(&self, op: &'static str, a: Var, b: Var) -> Result<Bcast> {
        let (sa, sb) = (self.value(a), self.value(b));
        if sa.shape() == sb.shape() {
            Ok(Bcast::Same)
        } else if sb.len() == 1 {
            Ok(Bcast::Scalar)
        } else if sb.rows() == 1 && sb.cols() == sa.cols() {
            Ok(Bcast::Row)
        } else {
            Err(Error::shape(op, format!("{:?} vs {:?}", sa.shape(), sb.shape())))
        }
    }

    fn binary(&self, a: Var, b: Var, kind: Bcast, f: impl Fn(f64, f64) -> f64) -> NDArray {
        let (va, vb) = (self.value(a), self.value(b));
        let mut out = va.clone();
        let cols = va.cols();
        for (i, o) in out.data_mut().iter_mut().enumerate() {
            let bv = match kind {
                Bcast::Same => vb.data()[i],
                Bcast::Row => vb.data()[i % cols],
                Bcast::Scalar => vb.data()[0],
            };
            *o = f(*o, bv);
        }
        out
    }

    /// `a + b`; `b` may be a `[1, n]` row or a scalar broadcast over `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let kind = self.bcast_kind("add", a, b)?;
        let out = self.binary(a, b, kind, |x, y| x + y);
        self.push("add", out, Op::Add(a, b, kind))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let kind = self.bcast_kind("sub", a, b)?;
        let out = self.binary(a, b, kind, |x, y| x - y);
        self.push("sub", out, Op::Sub(a, b, kind))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let kind = self.bcast_kind("mul", a, b)?;
        let out = self.binary(a, b, kind, |x, y| x * y);
        self.push("mul", out, Op::Mul(a, b, kind))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let out = self.value(a).map(|x| x * s);
        self.push("scale", out, Op::Scale(a, s))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(sigmoid);
        self.push("sigmoid", out, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(f64::tanh);
        self.push("tanh", out, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push("relu", out, Op::Relu(a))
    }

    /// Row-wise softmax.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        self.softmax_rows_masked(a, |_, _| true)
    }

    /// Row-wise softmax restricted to entries where `allowed(row, col)`;
    /// disallowed entries are exactly zero.
    pub fn softmax_rows_masked(
        &mut self,
        a: Var,
        allowed: impl Fn(usize, usize) -> bool,
    ) -> Result<Var> {
        let x = self.value(a);
        let (rows, cols) = (x.rows(), x.cols());
        let mut out = NDArray::zeros(&[rows, cols]);
        for r in 0..rows {
            let row = x.row_slice(r);
            let max = (0..cols)
                .filter(|&c| allowed(r, c))
                .map(|c| row[c])
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(Error::shape("softmax", format!("row {r} fully masked")));
            }
            let o = out.row_slice_mut(r);
            let mut total = 0.0;
            for c in 0..cols {
                if allowed(r, c) {
                    o[c] = (row[c] - max).exp();
                    total += o[c];
                }
            }
            for v in o.iter_mut() {
                *v /= total;
            }
        }
        self.push("softmax", out, Op::SoftmaxRows(a))
    }

    /// Row-wise normalization to zero mean and unit variance (no affine).
    pub fn layer_norm(&mut self, a: Var, eps: f64) -> Result<Var> {
        let x = self.value(a);
        let (rows, cols) = (x.rows(), x.cols());
        let mut out = x.clone();
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = out.row_slice_mut(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / cols as f64;
            let is = 1.0 / (var + eps).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mean) * is;
            }
            inv_std.push(is);
        }
        self.push("layer_norm", out, Op::LayerNorm(a, inv_std))
    }

    /// Row lookup into an embedding table `[V, d]`, giving `[ids.len(), d]`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let t = self.value(table);
        if ids.is_empty() {
            return Err(Error::Empty("gather ids"));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= t.rows()) {
            return Err(Error::OutOfRange(format!(
                "embedding id {bad} for table of {} rows",
                t.rows()
            )));
        }
        let d = t.cols();
        let mut data = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            data.extend_from_slice(t.row_slice(i));
        }
        let out = NDArray::new(vec![ids.len(), d], data)?;
        self.push("gather", out, Op::Gather(table, ids.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let vals: Vec<&NDArray> = parts.iter().map(|&p| self.value(p)).collect();
        let out = NDArray::concat_rows(&vals)?;
        self.push("concat_rows", out, Op::ConcatRows(parts.to_vec()))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let vals: Vec<&NDArray> = parts.iter().map(|&p| self.value(p)).collect();
        let out = NDArray::concat_cols(&vals)?;
        self.push("concat_cols", out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let out = self.value(a).slice_rows(start, end)?;
        self.push("slice_rows", out, Op::SliceRows(a, start))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let out = self.value(a).slice_cols(start, end)?;
        self.push("slice_cols", out, Op::SliceCols(a, start))
    }

    pub fn reverse_rows(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).reverse_rows();
        self.push("reverse_rows", out, Op::ReverseRows(a))
    }

    /// Sliding windows over rows of `x: [T, c]`, giving
    /// `[T + pad_left + pad_right - width + 1, width * c]`. Out-of-range
    /// positions read as zero. Multiplying by a `[width * c, out]` kernel
    /// gives a 1-D convolution.
    pub fn windows(
        &mut self,
        x: Var,
        width: usize,
        pad_left: usize,
        pad_right: usize,
    ) -> Result<Var> {
        let xv = self.value(x);
        let (t, c) = (xv.rows(), xv.cols());
        if width == 0 || t + pad_left + pad_right < width {
            return Err(Error::shape(
                "windows",
                format!("width {width} over {t} rows with padding {pad_left}+{pad_right}"),
            ));
        }
        let out_rows = t + pad_left + pad_right - width + 1;
        let mut out = NDArray::zeros(&[out_rows, width * c]);
        for r in 0..out_rows {
            let o = out.row_slice_mut(r);
            for j in 0..width {
                let src = r + j;
                if src >= pad_left && src - pad_left < t {
                    o[j * c..(j + 1) * c].copy_from_slice(xv.row_slice(src - pad_left));
                }
            }
        }
        self.push(
            "windows",
            out,
            Op::Window {
                x,
                width,
                pad_left,
            },
        )
    }

    /// Column-wise max over rows: `[T, c] -> [1, c]`.
    pub fn max_rows(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let (rows, cols) = (x.rows(), x.cols());
        let mut arg = vec![0usize; cols];
        let mut best = x.row_slice(0).to_vec();
        for r in 1..rows {
            for (c, &v) in x.row_slice(r).iter().enumerate() {
                if v > best[c] {
                    best[c] = v;
                    arg[c] = r;
                }
            }
        }
        self.push("max_rows", NDArray::row(&best), Op::MaxRows(a, arg))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).sum();
        self.push("sum", NDArray::scalar(s), Op::SumAll(a))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len() as f64;
        let s = self.sum(a)?;
        self.scale(s, 1.0 / n)
    }

    /// Summed negative log-likelihood of `targets` under row-wise softmax
    /// of `logits: [n, V]`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let l = self.value(logits);
        let (rows, cols) = (l.rows(), l.cols());
        if targets.len() != rows {
            return Err(Error::shape(
                "cross_entropy",
                format!("{rows} rows, {} targets", targets.len()),
            ));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= cols) {
            return Err(Error::OutOfRange(format!("target {bad} of {cols} classes")));
        }
        let mut probs = NDArray::zeros(&[rows, cols]);
        let mut nll = 0.0;
        for r in 0..rows {
            let row = l.row_slice(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let p = probs.row_slice_mut(r);
            let mut total = 0.0;
            for (pv, &x) in p.iter_mut().zip(row) {
                *pv = (x - max).exp();
                total += *pv;
            }
            for pv in p.iter_mut() {
                *pv /= total;
            }
            nll -= row[targets[r]] - max - total.ln();
        }
        self.push(
            "cross_entropy",
            NDArray::scalar(nll),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        )
    }

    /// Inverted dropout with keep-probability `1 - p`.
    pub fn dropout<R: Rng>(&mut self, a: Var, p: f64, rng: &mut R) -> Result<Var> {
        if p <= 0.0 {
            return Ok(a);
        }
        let keep = 1.0 - p;
        let shape = self.shape(a).to_vec();
        let n = shape.iter().product();
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let m = self.constant(NDArray::new(shape, mask)?)?;
        self.mul(a, m)
    }

    /// Reverse pass from a scalar `loss`. Every parameter leaf on the tape
    /// gets an entry, zero when the loss does not depend on it.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        let loss_shape = self.value(loss).shape().to_vec();
        if loss_shape.iter().product::<usize>() != 1 {
            return Err(Error::NonScalarLoss(loss_shape));
        }
        self.consumed = true;

        let mut grads: Vec<Option<NDArray>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(NDArray::full(&loss_shape, 1.0));
        let mut out = Gradients::new();

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else {
                if let Op::Param(id) = self.nodes[i].op {
                    out.insert(id, NDArray::zeros(self.params.get(id).shape()));
                }
                continue;
            };
            self.backprop_node(i, g, &mut grads, &mut out)?;
        }
        for node in &self.nodes[loss.0 + 1..] {
            if let Op::Param(id) = node.op {
                out.insert(id, NDArray::zeros(self.params.get(id).shape()));
            }
        }
        Ok(out)
    }

    fn backprop_node(
        &self,
        i: usize,
        g: NDArray,
        grads: &mut [Option<NDArray>],
        out: &mut Gradients,
    ) -> Result<()> {
        let mut acc = |v: Var, d: NDArray| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&d),
            slot @ None => *slot = Some(d),
        };
        let y = self.value(Var(i));
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Param(id) => out.insert(*id, g),
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (va.rows(), va.cols(), vb.cols());
                let mut ga = vec![0.0; m * k];
                matmul_into(g.data(), vb.transpose().data(), &mut ga, m, n, k);
                let mut gb = vec![0.0; k * n];
                matmul_into(va.transpose().data(), g.data(), &mut gb, k, m, n);
                acc(*a, NDArray::new(va.shape().to_vec(), ga)?);
                acc(*b, NDArray::new(vb.shape().to_vec(), gb)?);
            }
            Op::Transpose(a) => acc(*a, g.transpose()),
            Op::Add(a, b, kind) => {
                let gb = reduce_bcast(&g, *kind, self.value(*b));
                acc(*a, g);
                acc(*b, gb);
            }
            Op::Sub(a, b, kind) => {
                let mut gb = reduce_bcast(&g, *kind, self.value(*b));
                gb.scale_assign(-1.0);
                acc(*a, g);
                acc(*b, gb);
            }
            Op::Mul(a, b, kind) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let cols = va.cols();
                let mut ga = g.clone();
                let mut gab = g.clone();
                for (idx, (gv, pv)) in ga.data_mut().iter_mut().zip(gab.data_mut()).enumerate() {
                    let bv = match kind {
                        Bcast::Same => vb.data()[idx],
                        Bcast::Row => vb.data()[idx % cols],
                        Bcast::Scalar => vb.data()[0],
                    };
                    *pv *= va.data()[idx];
                    *gv *= bv;
                }
                let gb = reduce_bcast(&gab, *kind, vb);
                acc(*a, ga);
                acc(*b, gb);
            }
            Op::Scale(a, s) => acc(*a, g.map(|v| v * s)),
            Op::Sigmoid(a) => {
                let d = zip_map(&g, y, |gv, yv| gv * yv * (1.0 - yv));
                acc(*a, d);
            }
            Op::Tanh(a) => {
                let d = zip_map(&g, y, |gv, yv| gv * (1.0 - yv * yv));
                acc(*a, d);
            }
            Op::Relu(a) => {
                let d = zip_map(&g, self.value(*a), |gv, xv| if xv > 0.0 { gv } else { 0.0 });
                acc(*a, d);
            }
            Op::SoftmaxRows(a) => {
                let mut d = g.clone();
                for r in 0..y.rows() {
                    let yr = y.row_slice(r);
                    let dot: f64 = yr.iter().zip(g.row_slice(r)).map(|(p, q)| p * q).sum();
                    for (dv, &yv) in d.row_slice_mut(r).iter_mut().zip(yr) {
                        *dv = yv * (*dv - dot);
                    }
                }
                acc(*a, d);
            }
            Op::LayerNorm(a, inv_std) => {
                let cols = y.cols() as f64;
                let mut d = g.clone();
                for (r, &is) in inv_std.iter().enumerate() {
                    let yr = y.row_slice(r);
                    let gr = g.row_slice(r);
                    let mean_g = gr.iter().sum::<f64>() / cols;
                    let mean_gy = gr.iter().zip(yr).map(|(p, q)| p * q).sum::<f64>() / cols;
                    for ((dv, &gv), &yv) in d.row_slice_mut(r).iter_mut().zip(gr).zip(yr) {
                        *dv = is * (gv - mean_g - yv * mean_gy);
                    }
                }
                acc(*a, d);
            }
            Op::Gather(table, ids) => {
                let mut d = NDArray::zeros(self.value(*table).shape());
                for (r, &id) in ids.iter().enumerate() {
                    for (dv, &gv) in d.row_slice_mut(id).iter_mut().zip(g.row_slice(r)) {
                        *dv += gv;
                    }
                }
                acc(*table, d);
            }
            Op::ConcatRows(parts) => {
                let mut start = 0;
                for &p in parts {
                    let n = self.value(p).rows();
                    acc(p, g.slice_rows(start, start + n)?);
                    start += n;
                }
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for &p in parts {
                    let n = self.value(p).cols();
                    acc(p, g.slice_cols(start, start + n)?);
                    start += n;
                }
            }
            Op::SliceRows(a, start) => {
                let mut d = NDArray::zeros(self.value(*a).shape());
                let c = g.cols();
                d.data_mut()[start * c..start * c + g.len()].copy_from_slice(g.data());
                acc(*a, d);
            }
            Op::SliceCols(a, start) => {
                let mut d = NDArray::zeros(self.value(*a).shape());
                let w = g.cols();
                for r in 0..g.rows() {
                    d.row_slice_mut(r)[*start..start + w].copy_from_slice(g.row_slice(r));
                }
                acc(*a, d);
            }
            Op::ReverseRows(a) => acc(*a, g.reverse_rows()),
            Op::Window { x, width, pad_left } => {
                let xv = self.value(*x);
                let (t, c) = (xv.rows(), xv.cols());
                let mut d = NDArray::zeros(xv.shape());
                for r in 0..g.rows() {
                    let gr = g.row_slice(r);
                    for j in 0..*width {
                        let src = r + j;
                        if src >= *pad_left && src - pad_left < t {
                            let dr = d.row_slice_mut(src - pad_left);
                            for (dv, &gv) in dr.iter_mut().zip(&gr[j * c..(j + 1) * c]) {
                                *dv += gv;
                            }
                        }
                    }
                }
                acc(*x, d);
            }
            Op::MaxRows(a, arg) => {
                let mut d = NDArray::zeros(self.value(*a).shape());
                for (c, &r) in arg.iter().enumerate() {
                    d.set(r, c, g.data()[c]);
                }
                acc(*a, d);
            }
            Op::SumAll(a) => {
                acc(*a, NDArray::full(self.value(*a).shape(), g.item()));
            }
            Op::CrossEntropy {
                logits,
                targets,
                probs,
            } => {
                let mut d = probs.clone();
                for (r, &t) in targets.iter().enumerate() {
                    let row = d.row_slice_mut(r);
                    row[t] -= 1.0;
                }
                d.scale_assign(g.item());
                acc(*logits, d);
            }
        }
        Ok(())
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

fn zip_map(a: &NDArray, b: &NDArray, f: impl Fn(f64, f64) -> f64) -> NDArray {
    let mut out = a.clone();
    for (o, &bv) in out.data_mut().iter_mut().zip(b.data()) {
        *o = f(*o, bv);
    }
    out
}

fn reduce_bcast(g: &NDArray, kind: Bcast, target: &NDArray) -> NDArray {
    match kind {
        Bcast::Same => g.clone(),
        Bcast::Scalar => NDArray::full(target.shape(), g.sum()),
        Bcast::Row => {
            let cols = g.cols();
            let mut out = vec![0.0; cols];
            for r in 0..g.rows() {
                for (o, &v) in out.iter_mut().zip(g.row_slice(r)) {
                    *o += v;
                }
            }
            NDArray::new(target.shape().to_vec(), out).expect("row broadcast shape")
        }
    }
}
