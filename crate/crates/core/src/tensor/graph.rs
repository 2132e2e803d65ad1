use rand::Rng as _;

use super::{Real, Tensor};
use crate::error::{invalid, Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddScalar(Var, Var),
    Mul(Var, Var),
    MulScalar(Var, Var),
    AddBias(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    MaskMul(Var, Vec<T>),
    ScaleRows(Var, Vec<T>),
    Reshape(Var),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    GatherRows(Var, Vec<Option<usize>>),
    SegmentMax(Var, Vec<usize>),
    SegmentMean(Var, usize, Vec<usize>),
    SoftmaxXent(Var, Vec<T>, Vec<usize>),
    SumAll(Var),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Append-only record of applied operations.
///
/// Nodes are stored in creation order, which is a topological order, so
/// [`Graph::backward`] simply walks the tape in reverse. A graph is meant to
/// be built for one forward pass and then dropped.
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_err(op: &'static str, a: &[usize], b: &[usize]) -> Error {
    Error::Shape {
        op,
        lhs: a.to_vec(),
        rhs: b.to_vec(),
    }
}

fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `out[m×n] += a[m×k] · b[k×n]`
fn gemm_nn<T: Real>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
}

/// `out[m×k] += g[m×n] · b[k×n]ᵀ`
fn gemm_nt<T: Real>(g: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            let mut s = T::zero();
            for (&gv, &bv) in grow.iter().zip(brow) {
                s = s + gv * bv;
            }
            out[i * k + p] = out[i * k + p] + s;
        }
    }
}

/// `out[k×n] += a[m×k]ᵀ · g[m×n]`
fn gemm_tn<T: Real>(a: &[T], g: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &gv) in orow.iter_mut().zip(grow) {
                *o = *o + av * gv;
            }
        }
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn matrix_dims(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        let s = self.shape(v);
        if s.len() != 2 {
            return Err(shape_err(op, s, &[]));
        }
        Ok((s[0], s[1]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.matrix_dims(a, "matmul")?;
        let (k2, n) = self.matrix_dims(b, "matmul")?;
        if k != k2 {
            return Err(shape_err("matmul", self.shape(a), self.shape(b)));
        }
        let mut out = vec![T::zero(); m * n];
        gemm_nn(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), &[a, b]))
    }

    fn zip_map(&self, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Tensor<T> {
        let (va, vb) = (self.value(a), self.value(b));
        let data = if vb.len() == 1 && va.len() != 1 {
            let s = vb.data()[0];
            va.data().iter().map(|&x| f(x, s)).collect()
        } else {
            va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect()
        };
        Tensor::new(va.shape().to_vec(), data).expect("shape preserved")
    }

    /// Orders `(a, b)` so that a scalar operand comes second. Errors unless
    /// the shapes are equal or one side is a scalar.
    fn broadcast_pair(&self, a: Var, b: Var, op: &'static str) -> Result<(Var, Var, bool)> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa == sb {
            Ok((a, b, false))
        } else if self.value(b).len() == 1 {
            Ok((a, b, true))
        } else if self.value(a).len() == 1 {
            Ok((b, a, true))
        } else {
            Err(shape_err(op, sa, sb))
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y, scalar) = self.broadcast_pair(a, b, "add")?;
        let out = self.zip_map(x, y, |p, q| p + q);
        let op = if scalar { Op::AddScalar(x, y) } else { Op::Add(x, y) };
        Ok(self.push(out, op, &[x, y]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y, scalar) = self.broadcast_pair(a, b, "mul")?;
        let out = self.zip_map(x, y, |p, q| p * q);
        let op = if scalar { Op::MulScalar(x, y) } else { Op::Mul(x, y) };
        Ok(self.push(out, op, &[x, y]))
    }

    /// `x[m×n] + bias[n]` added to every row.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (m, n) = self.matrix_dims(x, "add_bias")?;
        if self.value(bias).len() != n {
            return Err(shape_err("add_bias", self.shape(x), self.shape(bias)));
        }
        let b = self.value(bias).data();
        let mut data = self.value(x).data().to_vec();
        for row in data.chunks_mut(n) {
            for (o, &bv) in row.iter_mut().zip(b) {
                *o = *o + bv;
            }
        }
        let out = Tensor::new(vec![m, n], data)?;
        Ok(self.push(out, Op::AddBias(x, bias), &[x, bias]))
    }

    fn unary(&mut self, x: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let v = self.value(x);
        let data = v.data().iter().map(|&e| f(e)).collect();
        let out = Tensor::new(v.shape().to_vec(), data).expect("shape preserved");
        self.push(out, op, &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, T::tanh, Op::Tanh(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |e| if e < T::zero() { T::zero() } else { e }, Op::Relu(x))
    }

    /// Inverted dropout. Identity in eval mode or when `p == 0`.
    pub fn dropout(&mut self, x: Var, p: f64, mode: Mode, rng: &mut Rng) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(invalid(format!("dropout probability must be in [0, 1), got {p}")));
        }
        if mode == Mode::Eval || p == 0.0 {
            return Ok(x);
        }
        let keep = T::of(1.0 / (1.0 - p));
        let mask: Vec<T> = (0..self.value(x).len())
            .map(|_| if rng.random::<f64>() < p { T::zero() } else { keep })
            .collect();
        Ok(self.mask_mul(x, mask))
    }

    /// Elementwise product with a constant of the same length.
    pub fn mask_mul(&mut self, x: Var, mask: Vec<T>) -> Var {
        assert_eq!(mask.len(), self.value(x).len());
        let out = {
            let v = self.value(x);
            let data = v.data().iter().zip(&mask).map(|(&a, &m)| a * m).collect();
            Tensor::new(v.shape().to_vec(), data).expect("shape preserved")
        };
        self.push(out, Op::MaskMul(x, mask), &[x])
    }

    /// Multiplies row `r` by the constant `factors[r]`.
    pub fn scale_rows(&mut self, x: Var, factors: Vec<T>) -> Result<Var> {
        let (m, n) = self.matrix_dims(x, "scale_rows")?;
        if factors.len() != m {
            return Err(shape_err("scale_rows", self.shape(x), &[factors.len()]));
        }
        let mut data = self.value(x).data().to_vec();
        for (row, &f) in data.chunks_mut(n).zip(&factors) {
            row.iter_mut().for_each(|e| *e = if f == T::zero() { T::zero() } else { *e * f });
        }
        let out = Tensor::new(vec![m, n], data)?;
        Ok(self.push(out, Op::ScaleRows(x, factors), &[x]))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let out = self.value(x).clone().reshape(shape)?;
        Ok(self.push(out, Op::Reshape(x), &[x]))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (m, n) = self.matrix_dims(x, "slice_cols")?;
        if len == 0 || start + len > n {
            return Err(shape_err("slice_cols", self.shape(x), &[start, len]));
        }
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(m * len);
        for r in 0..m {
            data.extend_from_slice(&src[r * n + start..r * n + start + len]);
        }
        let out = Tensor::new(vec![m, len], data)?;
        Ok(self.push(out, Op::SliceCols(x, start), &[x]))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| invalid("concat_cols of nothing"))?;
        let (m, _) = self.matrix_dims(first, "concat_cols")?;
        let mut total = 0;
        for &p in parts {
            let (pm, pn) = self.matrix_dims(p, "concat_cols")?;
            if pm != m {
                return Err(shape_err("concat_cols", self.shape(first), self.shape(p)));
            }
            total += pn;
        }
        let mut data = Vec::with_capacity(m * total);
        for r in 0..m {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let out = Tensor::new(vec![m, total], data)?;
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), parts))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| invalid("concat_rows of nothing"))?;
        let (_, n) = self.matrix_dims(first, "concat_rows")?;
        let mut data = Vec::new();
        let mut m = 0;
        for &p in parts {
            let (pm, pn) = self.matrix_dims(p, "concat_rows")?;
            if pn != n {
                return Err(shape_err("concat_rows", self.shape(first), self.shape(p)));
            }
            m += pm;
            data.extend_from_slice(self.value(p).data());
        }
        let out = Tensor::new(vec![m, n], data)?;
        Ok(self.push(out, Op::ConcatRows(parts.to_vec()), parts))
    }

    /// Output row `r` is input row `index[r]`, or zeros for `None`.
    pub fn gather_rows(&mut self, x: Var, index: Vec<Option<usize>>) -> Result<Var> {
        let (m, n) = self.matrix_dims(x, "gather_rows")?;
        if index.is_empty() {
            return Err(invalid("gather_rows with empty index"));
        }
        let src = self.value(x);
        let mut data = Vec::with_capacity(index.len() * n);
        for &i in &index {
            match i {
                Some(i) if i < m => data.extend_from_slice(src.row(i)),
                Some(i) => return Err(invalid(format!("gather_rows index {i} out of {m} rows"))),
                None => data.extend(std::iter::repeat_n(T::zero(), n)),
            }
        }
        let out = Tensor::new(vec![index.len(), n], data)?;
        Ok(self.push(out, Op::GatherRows(x, index), &[x]))
    }

    fn check_segments(&self, x: Var, seg: usize, lens: &[usize], op: &'static str) -> Result<(usize, usize)> {
        let (m, n) = self.matrix_dims(x, op)?;
        if seg == 0 || m != seg * lens.len() {
            return Err(shape_err(op, self.shape(x), &[lens.len(), seg]));
        }
        if let Some(&bad) = lens.iter().find(|&&l| l == 0 || l > seg) {
            return Err(invalid(format!("{op}: valid length {bad} outside 1..={seg}")));
        }
        Ok((m, n))
    }

    /// `x` holds `lens.len()` segments of `seg` rows each. Output row `s` is
    /// the columnwise max over the first `lens[s]` rows of segment `s`. Ties
    /// go to the lowest row.
    pub fn segment_max(&mut self, x: Var, seg: usize, lens: &[usize]) -> Result<Var> {
        let (_, n) = self.check_segments(x, seg, lens, "segment_max")?;
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(lens.len() * n);
        let mut arg = Vec::with_capacity(lens.len() * n);
        for (s, &len) in lens.iter().enumerate() {
            for c in 0..n {
                let mut best = s * seg * n + c;
                for r in 1..len {
                    let i = (s * seg + r) * n + c;
                    if src[i] > src[best] || src[i].is_nan() {
                        best = i;
                    }
                }
                data.push(src[best]);
                arg.push(best);
            }
        }
        let out = Tensor::new(vec![lens.len(), n], data)?;
        Ok(self.push(out, Op::SegmentMax(x, arg), &[x]))
    }

    pub fn segment_mean(&mut self, x: Var, seg: usize, lens: &[usize]) -> Result<Var> {
        let (_, n) = self.check_segments(x, seg, lens, "segment_mean")?;
        let src = self.value(x).data();
        let mut data = vec![T::zero(); lens.len() * n];
        for (s, &len) in lens.iter().enumerate() {
            let out = &mut data[s * n..(s + 1) * n];
            for r in 0..len {
                let row = &src[(s * seg + r) * n..(s * seg + r + 1) * n];
                for (o, &v) in out.iter_mut().zip(row) {
                    *o = *o + v;
                }
            }
            let inv = T::one() / T::of(len as f64);
            out.iter_mut().for_each(|o| *o = *o * inv);
        }
        let out = Tensor::new(vec![lens.len(), n], data)?;
        Ok(self.push(out, Op::SegmentMean(x, seg, lens.to_vec()), &[x]))
    }

    /// Per-dimension max over the first `valid_len` rows of `h[T×d]`,
    /// returned with shape `[d]`.
    pub fn masked_max_pool(&mut self, h: Var, valid_len: usize) -> Result<Var> {
        let (t, d) = self.matrix_dims(h, "masked_max_pool")?;
        let pooled = self.segment_max(h, t, &[valid_len])?;
        self.reshape(pooled, vec![d])
    }

    /// Mean over the batch of `-log softmax(logits)[target]`, shape `[1]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let (b, c) = self.matrix_dims(logits, "softmax_cross_entropy")?;
        if targets.len() != b {
            return Err(shape_err("softmax_cross_entropy", self.shape(logits), &[targets.len()]));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= c) {
            return Err(invalid(format!("target class {t} out of range 0..{c}")));
        }
        let probs = softmax_rows(self.value(logits)).into_data();
        let x = self.value(logits).data();
        let mut loss = T::zero();
        for (r, &t) in targets.iter().enumerate() {
            let row = &x[r * c..(r + 1) * c];
            let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
            let s = row.iter().fold(T::zero(), |acc, &v| acc + (v - max).exp());
            loss = loss + (max - row[t]) + s.ln();
        }
        let loss = loss / T::of(b as f64);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxXent(logits, probs, targets.to_vec()),
            &[logits],
        ))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let s = self
            .value(x)
            .data()
            .iter()
            .fold(T::zero(), |acc, &v| acc + v);
        self.push(Tensor::scalar(s), Op::SumAll(x), &[x])
    }

    /// Reverse pass from a scalar output.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).len() != 1 {
            return Err(shape_err("backward", self.shape(loss), &[1]));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            let (lower, upper) = grads.split_at_mut(i);
            let Some(g) = upper[0].as_deref() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.backward_node(i, g, lower);
        }
        let grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, n)| g.filter(|_| n.requires_grad && matches!(n.op, Op::Leaf)))
            .collect();
        Ok(Gradients { grads })
    }

    fn backward_node(&self, i: usize, g: &[T], lower: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        let out = node.value.data();
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [T])| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            let len = self.nodes[v.0].value.len();
            let slot = lower[v.0].get_or_insert_with(|| vec![T::zero(); len]);
            f(slot);
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (va.rows(), va.cols(), vb.cols());
                acc(*a, &mut |ga| gemm_nt(g, vb.data(), ga, m, k, n));
                acc(*b, &mut |gb| gemm_tn(va.data(), g, gb, m, k, n));
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    acc(v, &mut |gv| add_into(gv, g));
                }
            }
            Op::AddScalar(a, s) => {
                acc(*a, &mut |ga| add_into(ga, g));
                let total = g.iter().fold(T::zero(), |x, &y| x + y);
                acc(*s, &mut |gs| gs[0] = gs[0] + total);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |ga| {
                    for ((o, &gi), &bv) in ga.iter_mut().zip(g).zip(vb) {
                        *o = *o + gi * bv;
                    }
                });
                acc(*b, &mut |gb| {
                    for ((o, &gi), &av) in gb.iter_mut().zip(g).zip(va) {
                        *o = *o + gi * av;
                    }
                });
            }
            Op::MulScalar(a, s) => {
                let (va, sv) = (self.value(*a).data(), self.value(*s).data()[0]);
                acc(*a, &mut |ga| {
                    for (o, &gi) in ga.iter_mut().zip(g) {
                        *o = *o + gi * sv;
                    }
                });
                let total = g.iter().zip(va).fold(T::zero(), |x, (&gi, &av)| x + gi * av);
                acc(*s, &mut |gs| gs[0] = gs[0] + total);
            }
            Op::AddBias(x, b) => {
                acc(*x, &mut |gx| add_into(gx, g));
                let n = self.value(*b).len();
                acc(*b, &mut |gb| {
                    for row in g.chunks(n) {
                        add_into(gb, row);
                    }
                });
            }
            Op::Sigmoid(x) => acc(*x, &mut |gx| {
                for ((o, &gi), &y) in gx.iter_mut().zip(g).zip(out) {
                    *o = *o + gi * y * (T::one() - y);
                }
            }),
            Op::Tanh(x) => acc(*x, &mut |gx| {
                for ((o, &gi), &y) in gx.iter_mut().zip(g).zip(out) {
                    *o = *o + gi * (T::one() - y * y);
                }
            }),
            Op::Relu(x) => {
                let vx = self.value(*x).data();
                acc(*x, &mut |gx| {
                    for ((o, &gi), &xv) in gx.iter_mut().zip(g).zip(vx) {
                        if xv > T::zero() {
                            *o = *o + gi;
                        }
                    }
                })
            }
            Op::MaskMul(x, mask) => acc(*x, &mut |gx| {
                for ((o, &gi), &m) in gx.iter_mut().zip(g).zip(mask) {
                    *o = *o + gi * m;
                }
            }),
            Op::ScaleRows(x, factors) => {
                let n = self.value(*x).cols();
                acc(*x, &mut |gx| {
                    for ((orow, grow), &f) in gx.chunks_mut(n).zip(g.chunks(n)).zip(factors) {
                        for (o, &gi) in orow.iter_mut().zip(grow) {
                            *o = *o + gi * f;
                        }
                    }
                })
            }
            Op::Reshape(x) => acc(*x, &mut |gx| add_into(gx, g)),
            Op::SliceCols(x, start) => {
                let n = self.value(*x).cols();
                let len = node.value.cols();
                acc(*x, &mut |gx| {
                    for (orow, grow) in gx.chunks_mut(n).zip(g.chunks(len)) {
                        add_into(&mut orow[*start..*start + len], grow);
                    }
                })
            }
            Op::ConcatCols(parts) => {
                let total = node.value.cols();
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).cols();
                    acc(p, &mut |gp| {
                        for (orow, grow) in gp.chunks_mut(n).zip(g.chunks(total)) {
                            add_into(orow, &grow[offset..offset + n]);
                        }
                    });
                    offset += n;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    acc(p, &mut |gp| add_into(gp, &g[offset..offset + len]));
                    offset += len;
                }
            }
            Op::GatherRows(x, index) => {
                let n = self.value(*x).cols();
                acc(*x, &mut |gx| {
                    for (r, i) in index.iter().enumerate() {
                        if let Some(i) = *i {
                            add_into(&mut gx[i * n..(i + 1) * n], &g[r * n..(r + 1) * n]);
                        }
                    }
                })
            }
            Op::SegmentMax(x, arg) => acc(*x, &mut |gx| {
                for (&src, &gi) in arg.iter().zip(g) {
                    gx[src] = gx[src] + gi;
                }
            }),
            Op::SegmentMean(x, seg, lens) => {
                let n = self.value(*x).cols();
                acc(*x, &mut |gx| {
                    for (s, &len) in lens.iter().enumerate() {
                        let inv = T::one() / T::of(len as f64);
                        for r in 0..len {
                            let row = &mut gx[(s * seg + r) * n..(s * seg + r + 1) * n];
                            for (o, &gi) in row.iter_mut().zip(&g[s * n..(s + 1) * n]) {
                                *o = *o + gi * inv;
                            }
                        }
                    }
                })
            }
            Op::SoftmaxXent(logits, probs, targets) => {
                let c = self.value(*logits).cols();
                let scale = g[0] / T::of(targets.len() as f64);
                acc(*logits, &mut |gl| {
                    for (r, &t) in targets.iter().enumerate() {
                        for j in 0..c {
                            let onehot = if j == t { T::one() } else { T::zero() };
                            let i = r * c + j;
                            gl[i] = gl[i] + (probs[i] - onehot) * scale;
                        }
                    }
                })
            }
            Op::SumAll(x) => acc(*x, &mut |gx| gx.iter_mut().for_each(|o| *o = *o + g[0])),
        }
    }
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let c = x.cols();
    let mut data = Vec::with_capacity(x.len());
    for row in x.data().chunks(c) {
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let exps: Vec<T> = row.iter().map(|&v| (v - max).exp()).collect();
        let s = exps.iter().fold(T::zero(), |a, &e| a + e);
        data.extend(exps.into_iter().map(|e| e / s));
    }
    Tensor::new(x.shape().to_vec(), data).expect("shape preserved")
}

/// Gradients of leaf nodes after [`Graph::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    /// `None` when `v` is not a trainable leaf or received no gradient.
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0)?.as_deref()
    }

    pub fn take(&mut self, v: Var) -> Option<Vec<T>> {
        self.grads.get_mut(v.0)?.take()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::tensor::gradcheck::check_gradients;
    use approx::assert_relative_eq;

    fn t(rows: &[&[f64]]) -> Tensor<f64> {
        Tensor::from_rows(rows).unwrap()
    }

    fn random(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut rng = stream(seed, Purpose::Data);
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn nan_survives_relu_and_max_pooling() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(Tensor::matrix(3, 2, vec![1.0, -1.0, f64::NAN, 2.0, 0.5, f64::NAN]).unwrap());
        let r = g.relu(x);
        assert!(g.value(r).data()[2].is_nan());
        assert_eq!(g.value(r).data()[1], 0.0);
        let m = g.segment_max(x, 3, &[3]).unwrap();
        assert!(g.value(m).data().iter().all(|v| v.is_nan()));
    }

    #[test]
    fn matmul_values_and_errors() {
        let mut g = Graph::new();
        let i = g.constant(Tensor::identity(2));
        let x = g.constant(t(&[&[1.5, -2.0], &[0.25, 4.0]]));
        let y = g.matmul(i, x).unwrap();
        assert_eq!(g.value(y), g.value(x));

        let a = g.constant(t(&[&[1.0, 2.0], &[3.0, 4.0]]));
        let b = g.constant(t(&[&[1.0], &[1.0]]));
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c).data(), &[3.0, 7.0]);

        match g.matmul(b, b) {
            Err(Error::Shape { lhs, rhs, .. }) => {
                assert_eq!(lhs, vec![2, 1]);
                assert_eq!(rhs, vec![2, 1]);
            }
            other => panic!("expected shape error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn elementwise_values() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(Tensor::vector(vec![-1.0, 0.0, 2.0]).unwrap());
        let r = g.relu(x);
        assert_eq!(g.value(r).data(), &[0.0, 0.0, 2.0]);
        let z = g.constant(Tensor::scalar(0.0));
        let s = g.sigmoid(z);
        assert_eq!(g.value(s).data(), &[0.5]);
        let two = g.constant(Tensor::scalar(2.0));
        let m = g.mul(x, two).unwrap();
        assert_eq!(g.value(m).data(), &[-2.0, 0.0, 4.0]);
        let bad = g.constant(Tensor::vector(vec![1.0, 2.0]).unwrap());
        assert!(g.add(x, bad).is_err());
    }

    #[test]
    fn sigmoid_is_finite_at_extremes() {
        let mut g = Graph::<f32>::new();
        let x = g.constant(Tensor::vector(vec![-1000.0, 1000.0]).unwrap());
        let s = g.sigmoid(x);
        assert_eq!(g.value(s).data(), &[0.0, 1.0]);
    }

    #[test]
    fn tanh_gradient_at_zero_is_one() {
        let mut g = Graph::<f64>::new();
        let x = g.param(Tensor::scalar(0.0));
        let y = g.tanh(x);
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[1.0]);
        let report = check_gradients(&[Tensor::scalar(0.0)], |g, v| Ok(g.tanh(v[0])));
        assert!(report.unwrap().max_rel_error < 1e-8);
    }

    #[test]
    fn softmax_cross_entropy_values() {
        let mut g = Graph::<f64>::new();
        let z = g.param(Tensor::zeros(&[1, 6]));
        let loss = g.softmax_cross_entropy(z, &[3]).unwrap();
        assert_relative_eq!(g.value(loss).data()[0], 6f64.ln(), epsilon = 1e-12);

        let logits = g.param(t(&[&[10.0, -10.0]]));
        let loss = g.softmax_cross_entropy(logits, &[0]).unwrap();
        // log(1 + e^-20), computed without cancellation.
        let expected = (-20f64).exp().ln_1p();
        assert_relative_eq!(g.value(loss).data()[0], expected, max_relative = 1e-12);
        assert_relative_eq!(expected, 2.061153622e-9, max_relative = 1e-9);
        assert!(g.softmax_cross_entropy(logits, &[2]).is_err());
    }

    #[test]
    fn cross_entropy_gradient_rows_sum_to_zero() {
        let mut g = Graph::new();
        let x = g.param(random(&[4, 6], 3));
        let loss = g.softmax_cross_entropy(x, &[0, 5, 2, 2]).unwrap();
        let grads = g.backward(loss).unwrap();
        for row in grads.get(x).unwrap().chunks(6) {
            assert!(row.iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn dropout_modes() {
        let mut rng = stream(1, Purpose::Dropout);
        let mut g = Graph::<f64>::new();
        let x = g.constant(Tensor::full(&[100_000], 1.0));
        assert_eq!(g.dropout(x, 0.0, Mode::Train, &mut rng).unwrap(), x);
        assert_eq!(g.dropout(x, 0.5, Mode::Eval, &mut rng).unwrap(), x);
        assert!(g.dropout(x, 1.0, Mode::Train, &mut rng).is_err());
        let d = g.dropout(x, 0.5, Mode::Train, &mut rng).unwrap();
        let v = g.value(d).data();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        assert!(v.iter().all(|&e| e == 0.0 || e == 2.0));
    }

    #[test]
    fn masked_max_pool_cases() {
        let mut g = Graph::<f64>::new();
        let h = g.param(t(&[&[1.0, 5.0], &[3.0, 2.0]]));
        let p = g.masked_max_pool(h, 2).unwrap();
        assert_eq!(g.value(p).data(), &[3.0, 5.0]);
        assert_eq!(g.value(p).shape(), &[2]);
        let first = g.masked_max_pool(h, 1).unwrap();
        assert_eq!(g.value(first).data(), &[1.0, 5.0]);
        assert!(g.masked_max_pool(h, 0).is_err());
        assert!(g.masked_max_pool(h, 3).is_err());

        let padded = g.constant(t(&[&[1.0, 5.0], &[3.0, 2.0], &[1e9, 1e9]]));
        let q = g.masked_max_pool(padded, 2).unwrap();
        assert_eq!(g.value(q).data(), &[3.0, 5.0]);
    }

    #[test]
    fn max_pool_ties_route_to_first_index() {
        let mut g = Graph::<f64>::new();
        let h = g.param(t(&[&[2.0], &[2.0], &[1.0]]));
        let p = g.masked_max_pool(h, 3).unwrap();
        let s = g.sum_all(p);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(h).unwrap(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn shared_parameter_accumulates_once_per_use() {
        let mut g = Graph::<f64>::new();
        let w = g.param(Tensor::scalar(3.0));
        let y = g.mul(w, w).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get(w).unwrap(), &[6.0]);
    }

    #[test]
    fn every_op_passes_finite_differences() {
        for seed in 0..5 {
            let a = random(&[3, 4], seed);
            let b = random(&[4, 2], seed + 100);
            let bias = random(&[2], seed + 200);
            let w = random(&[3, 2], seed + 300);
            let s = random(&[1], seed + 400);
            let report = check_gradients(&[a, b, bias, w, s], |g, v| {
                let ab = g.matmul(v[0], v[1])?;
                let ab = g.add_bias(ab, v[2])?;
                let sg = g.sigmoid(ab);
                let th = g.tanh(v[3]);
                let prod = g.mul(sg, th)?;
                let sum = g.add(prod, v[3])?;
                let scaled = g.mul(sum, v[4])?;
                let shifted = g.add(scaled, v[4])?;
                let r = g.relu(shifted);
                let rows = g.scale_rows(r, vec![0.5, -1.0, 2.0])?;
                let left = g.slice_cols(rows, 0, 1)?;
                let cat = g.concat_cols(&[rows, left, sg])?;
                let stacked = g.concat_rows(&[cat, cat])?;
                let picked = g.gather_rows(stacked, vec![Some(5), None, Some(0), Some(2)])?;
                let mx = g.segment_max(picked, 2, &[2, 1])?;
                let mean = g.segment_mean(stacked, 3, &[3, 2])?;
                let both = g.concat_rows(&[mx, mean])?;
                g.softmax_cross_entropy(both, &[0, 4, 2, 1])
            })
            .unwrap();
            assert!(report.max_rel_error < 1e-4, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn matmul_gradient_matches_finite_differences() {
        let report = check_gradients(&[random(&[5, 3], 1), random(&[3, 4], 2)], |g, v| {
            let c = g.matmul(v[0], v[1])?;
            let t = g.tanh(c);
            Ok(g.sum_all(t))
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }
}
