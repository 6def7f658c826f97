//! Reverse-mode gradient tape.
//!
//! Every forward operation appends a node holding its output and whatever it
//! needs for the backward pass. [`Tape::backward`] walks the nodes in reverse
//! and returns gradients for every leaf registered with
//! [`Tape::param`]. Leaves registered with [`Tape::constant`] (frozen
//! parameters, inputs) take no gradient, and nodes that depend only on
//! constants are skipped entirely during the backward walk.
//!
//! ```
//! use wavefm::numerics::{Tape, Tensor};
//!
//! let w = Tensor::<f64>::from_rows(&[&[2.0], &[3.0]]).unwrap();
//! let x = Tensor::<f64>::from_rows(&[&[1.0, 1.0]]).unwrap();
//! let mut tape = Tape::new();
//! let wv = tape.param(&w);
//! let xv = tape.constant(&x);
//! let y = tape.matmul(xv, wv).unwrap();
//! let loss = tape.sum(y).unwrap();
//! let grads = tape.backward(loss, 1.0).unwrap();
//! assert_eq!(grads.get(wv).unwrap().data(), &[1.0, 1.0]);
//! ```

use std::borrow::Cow;

use rand::Rng;

use super::ops::{self, NormParts};
use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    AddTiled(Var, Var),
    Scale(Var, T),
    Relu(Var),
    SoftmaxRows(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<T>,
        rstd: Vec<T>,
    },
    Dropout {
        x: Var,
        mask: Vec<T>,
    },
    ConcatCols(Vec<Var>),
    SliceCols {
        x: Var,
        start: usize,
    },
    Reshape(Var),
    ReplaceRows {
        x: Var,
        token: Var,
        rows: Vec<usize>,
    },
    Attention {
        qkv: Var,
        heads: usize,
        group: usize,
        probs: Vec<T>,
    },
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<T>,
    },
    Mse {
        pred: Var,
        target: Vec<T>,
        rows: Option<Vec<bool>>,
        count: usize,
    },
    Sum(Var),
}

struct Node<'a, T: Real> {
    value: Cow<'a, Tensor<T>>,
    op: Op<T>,
    needs_grad: bool,
}

/// Records one forward pass. Parameters are borrowed, not copied.
pub struct Tape<'a, T: Real = f32> {
    nodes: Vec<Node<'a, T>>,
    macs: u64,
    attention_score_macs: u64,
}

impl<T: Real> Default for Tape<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of one backward pass, indexed by leaf [`Var`].
pub struct Gradients<T: Real> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

impl<'a, T: Real> Tape<'a, T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            macs: 0,
            attention_score_macs: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Multiply-adds issued by every matrix product on this tape.
    pub fn mac_count(&self) -> u64 {
        self.macs
    }

    /// Multiply-adds spent on `QKᵀ` and `PV` inside attention, the part that
    /// grows with the square of the token count.
    pub fn attention_score_macs(&self) -> u64 {
        self.attention_score_macs
    }

    /// Scalars held by the tape for the backward pass: owned node values plus
    /// saved buffers. Borrowed leaves are not counted.
    pub fn stored_scalars(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| {
                let own = match &n.value {
                    Cow::Owned(t) => t.len(),
                    Cow::Borrowed(_) => 0,
                };
                let saved = match &n.op {
                    Op::LayerNorm { xhat, rstd, .. } => xhat.len() + rstd.len(),
                    Op::Dropout { mask, .. } => mask.len(),
                    Op::Attention { probs, .. } | Op::CrossEntropy { probs, .. } => probs.len(),
                    Op::Mse { target, .. } => target.len(),
                    _ => 0,
                };
                own + saved
            })
            .sum()
    }

    fn push(
        &mut self,
        op_name: &'static str,
        value: Tensor<T>,
        op: Op<T>,
        inputs: &[Var],
    ) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: op_name });
        }
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn leaf(&mut self, value: Cow<'a, Tensor<T>>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf: receives a gradient.
    pub fn param(&mut self, t: &'a Tensor<T>) -> Var {
        self.leaf(Cow::Borrowed(t), true)
    }

    /// Leaf without a gradient (inputs, frozen parameters).
    pub fn constant(&mut self, t: &'a Tensor<T>) -> Var {
        self.leaf(Cow::Borrowed(t), false)
    }

    pub fn constant_owned(&mut self, t: Tensor<T>) -> Var {
        self.leaf(Cow::Owned(t), false)
    }

    pub fn param_owned(&mut self, t: Tensor<T>) -> Var {
        self.leaf(Cow::Owned(t), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = ops::matmul(self.value(a), self.value(b))?;
        let (m, k) = (self.value(a).rows(), self.value(a).cols());
        self.macs += (m * k * out.cols()) as u64;
        self.push("matmul", out, Op::MatMul(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(Error::shape(
                "add",
                format!("{:?} vs {:?}", x.shape(), y.shape()),
            ));
        }
        let data = x
            .data()
            .iter()
            .zip(y.data())
            .map(|(&p, &q)| p + q)
            .collect();
        let out = Tensor::new(x.shape(), data)?;
        self.push("add", out, Op::Add(a, b), &[a, b])
    }

    /// Adds a vector to every row (the only broadcast the tape supports).
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        let d = xv.cols();
        if bv.len() != d {
            return Err(Error::shape(
                "add_bias",
                format!("rows of {d} vs bias {:?}", bv.shape()),
            ));
        }
        let mut out = xv.clone();
        for row in out.data_mut().chunks_mut(d) {
            for (o, &b) in row.iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        self.push("add_bias", out, Op::AddBias(x, bias), &[x, bias])
    }

    /// `x` is `G·N × D`; adds the `N × D` table to each of the `G` blocks.
    pub fn add_tiled(&mut self, x: Var, table: Var) -> Result<Var> {
        let (xv, tv) = (self.value(x), self.value(table));
        if xv.cols() != tv.cols() || xv.rows() % tv.rows() != 0 {
            return Err(Error::shape(
                "add_tiled",
                format!("{:?} vs table {:?}", xv.shape(), tv.shape()),
            ));
        }
        let mut out = xv.clone();
        for block in out.data_mut().chunks_mut(tv.len()) {
            for (o, &p) in block.iter_mut().zip(tv.data()) {
                *o += p;
            }
        }
        self.push("add_tiled", out, Op::AddTiled(x, table), &[x, table])
    }

    pub fn scale(&mut self, x: Var, factor: T) -> Result<Var> {
        let out = self.value(x).map(|v| v * factor);
        self.push("scale", out, Op::Scale(x, factor), &[x])
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(|v| v.max(T::zero()));
        self.push("relu", out, Op::Relu(x), &[x])
    }

    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        let out = ops::softmax_rows(self.value(x));
        self.push("softmax_rows", out, Op::SoftmaxRows(x), &[x])
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let xv = self.value(x);
        let d = xv.cols();
        let (g, b) = (self.value(gain), self.value(bias));
        if g.len() != d || b.len() != d {
            return Err(Error::shape(
                "layer_norm",
                format!("last dim {d}, gain {:?}", g.shape()),
            ));
        }
        let NormParts { out, xhat, rstd } = ops::layer_norm_parts(xv.data(), d, g.data(), b.data());
        let out = Tensor::new(xv.shape(), out)?;
        self.push(
            "layer_norm",
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            },
            &[x, gain, bias],
        )
    }

    /// Training-mode dropout. `rate == 0` returns `x` itself.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, rate: f64, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!(
                "dropout rate {rate} must lie in [0, 1)"
            )));
        }
        if rate == 0.0 {
            return Ok(x);
        }
        let mask = ops::dropout_mask::<T, R>(self.value(x).len(), rate, rng)?;
        let xv = self.value(x);
        let data = xv.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let out = Tensor::new(xv.shape(), data)?;
        self.push("dropout", out, Op::Dropout { x, mask }, &[x])
    }

    /// Concatenates matrices with equal row counts along the columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.value(parts[0]).rows();
        if parts.iter().any(|&p| self.value(p).rows() != rows) {
            return Err(Error::shape("concat_cols", "row counts differ"));
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let out = Tensor::new(&[rows, total], data)?;
        self.push("concat_cols", out, Op::ConcatCols(parts.to_vec()), parts)
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.value(x);
        if start + len > xv.cols() || len == 0 {
            return Err(Error::shape(
                "slice_cols",
                format!("{start}+{len} of {} cols", xv.cols()),
            ));
        }
        let data = (0..xv.rows())
            .flat_map(|r| xv.row(r)[start..start + len].iter().copied())
            .collect();
        let out = Tensor::new(&[xv.rows(), len], data)?;
        self.push("slice_cols", out, Op::SliceCols { x, start }, &[x])
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).clone().reshape(shape)?;
        self.push("reshape", out, Op::Reshape(x), &[x])
    }

    /// Replaces the listed rows of `x` with the vector `token`.
    pub fn replace_rows(&mut self, x: Var, token: Var, rows: &[usize]) -> Result<Var> {
        let (xv, tv) = (self.value(x), self.value(token));
        let d = xv.cols();
        if tv.len() != d || rows.iter().any(|&r| r >= xv.rows()) {
            return Err(Error::shape(
                "replace_rows",
                format!("token {:?} into {:?}", tv.shape(), xv.shape()),
            ));
        }
        let mut out = xv.clone();
        for &r in rows {
            out.data_mut()[r * d..(r + 1) * d].copy_from_slice(tv.data());
        }
        self.push(
            "replace_rows",
            out,
            Op::ReplaceRows {
                x,
                token,
                rows: rows.to_vec(),
            },
            &[x, token],
        )
    }

    /// Multi-head self-attention over token groups; see
    /// [`ops::attention_forward`] for the layout. Returns the concatenated
    /// head outputs before the output projection.
    pub fn attention(&mut self, qkv: Var, heads: usize, group: usize) -> Result<Var> {
        let v = self.value(qkv);
        let (rows, width) = (v.rows(), v.cols());
        if width % 3 != 0 || (width / 3) % heads != 0 || group == 0 || rows % group != 0 {
            return Err(Error::shape(
                "attention",
                format!(
                    "qkv {:?} with {heads} heads and groups of {group}",
                    v.shape()
                ),
            ));
        }
        let d_model = width / 3;
        let (out, probs) = ops::attention_forward(v.data(), rows, d_model, heads, group);
        let score_macs = (2 * rows * group * d_model) as u64;
        self.macs += score_macs;
        self.attention_score_macs += score_macs;
        let out = Tensor::new(&[rows, d_model], out)?;
        self.push(
            "attention",
            out,
            Op::Attention {
                qkv,
                heads,
                group,
                probs,
            },
            &[qkv],
        )
    }

    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (loss, probs) = ops::cross_entropy(self.value(logits), labels)?;
        let op = Op::CrossEntropy {
            logits,
            labels: labels.to_vec(),
            probs: probs.into_data(),
        };
        self.push("cross_entropy", Tensor::scalar(loss), op, &[logits])
    }

    pub fn mse(&mut self, pred: Var, target: &Tensor<T>) -> Result<Var> {
        self.mse_rows(pred, target, None)
    }

    /// MSE restricted to rows where `rows[r]` is true (all rows when `None`).
    pub fn mse_rows(
        &mut self,
        pred: Var,
        target: &Tensor<T>,
        rows: Option<&[bool]>,
    ) -> Result<Var> {
        let p = self.value(pred);
        if p.shape() != target.shape() {
            return Err(Error::shape(
                "mse",
                format!("{:?} vs {:?}", p.shape(), target.shape()),
            ));
        }
        let d = p.cols();
        if let Some(sel) = rows {
            if sel.len() != p.rows() {
                return Err(Error::shape("mse", "row selection length"));
            }
        }
        let selected = |r: usize| rows.is_none_or(|s| s[r]);
        let mut total = T::zero();
        let mut count = 0usize;
        for r in 0..p.rows() {
            if selected(r) {
                for (&a, &b) in p.row(r).iter().zip(target.row(r)) {
                    total += (a - b) * (a - b);
                }
                count += d;
            }
        }
        let loss = if count == 0 {
            T::zero()
        } else {
            total / T::from_usize(count).unwrap()
        };
        let op = Op::Mse {
            pred,
            target: target.data().to_vec(),
            rows: rows.map(|s| s.to_vec()),
            count,
        };
        self.push("mse", Tensor::scalar(loss), op, &[pred])
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(x), &[x])
    }

    /// Backpropagates from the scalar `loss`, seeding its gradient with
    /// `seed` (use `1/B` to average per-chunk losses over a batch).
    pub fn backward(&self, loss: Var, seed: T) -> Result<Gradients<T>> {
        if self.value(loss).len() != 1 {
            return Err(Error::shape("backward", "loss must be a scalar"));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![seed]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
        }
        let grads = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                let node = &self.nodes[i];
                match (g, &node.op) {
                    (Some(g), Op::Leaf) if node.needs_grad => {
                        Some(Tensor::new(node.value.shape(), g).expect("grad shape"))
                    }
                    _ => None,
                }
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let out = &self.nodes[i].value;
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                if self.wants(*a) {
                    // dA = G·Bᵀ
                    let da = buf(grads, *a, av.len());
                    T::gemm(
                        m,
                        n,
                        k,
                        T::one(),
                        g,
                        n as isize,
                        1,
                        bv.data(),
                        1,
                        n as isize,
                        T::one(),
                        da,
                        k as isize,
                        1,
                    );
                }
                if self.wants(*b) {
                    // dB = Aᵀ·G
                    let db = buf(grads, *b, bv.len());
                    T::gemm(
                        k,
                        m,
                        n,
                        T::one(),
                        av.data(),
                        1,
                        k as isize,
                        g,
                        n as isize,
                        1,
                        T::one(),
                        db,
                        n as isize,
                        1,
                    );
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if self.wants(v) {
                        axpy(buf(grads, v, g.len()), g);
                    }
                }
            }
            Op::AddBias(x, bias) => {
                if self.wants(*x) {
                    axpy(buf(grads, *x, g.len()), g);
                }
                if self.wants(*bias) {
                    let d = out.cols();
                    let db = buf(grads, *bias, d);
                    for row in g.chunks(d) {
                        axpy(db, row);
                    }
                }
            }
            Op::AddTiled(x, table) => {
                if self.wants(*x) {
                    axpy(buf(grads, *x, g.len()), g);
                }
                if self.wants(*table) {
                    let n = self.value(*table).len();
                    let dt = buf(grads, *table, n);
                    for block in g.chunks(n) {
                        axpy(dt, block);
                    }
                }
            }
            Op::Scale(x, factor) => {
                let dx = buf(grads, *x, g.len());
                for (d, &gv) in dx.iter_mut().zip(g) {
                    *d += gv * *factor;
                }
            }
            Op::Relu(x) => {
                let dx = buf(grads, *x, g.len());
                for ((d, &gv), &o) in dx.iter_mut().zip(g).zip(out.data()) {
                    if o > T::zero() {
                        *d += gv;
                    }
                }
            }
            Op::SoftmaxRows(x) => {
                let d = out.cols();
                let dx = buf(grads, *x, g.len());
                for ((dr, gr), yr) in dx.chunks_mut(d).zip(g.chunks(d)).zip(out.data().chunks(d)) {
                    let dot: T = gr.iter().zip(yr).map(|(&a, &b)| a * b).sum();
                    for ((dv, &gv), &yv) in dr.iter_mut().zip(gr).zip(yr) {
                        *dv += yv * (gv - dot);
                    }
                }
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            } => {
                let d = out.cols();
                let gv = self.value(*gain).data();
                if self.wants(*gain) {
                    let dg = buf(grads, *gain, d);
                    for (gr, xr) in g.chunks(d).zip(xhat.chunks(d)) {
                        for j in 0..d {
                            dg[j] += gr[j] * xr[j];
                        }
                    }
                }
                if self.wants(*bias) {
                    let db = buf(grads, *bias, d);
                    for gr in g.chunks(d) {
                        axpy(db, gr);
                    }
                }
                if self.wants(*x) {
                    let inv_d = T::one() / T::from_usize(d).unwrap();
                    let dx = buf(grads, *x, g.len());
                    let mut dxhat = vec![T::zero(); d];
                    for (r, ((dr, gr), xr)) in dx
                        .chunks_mut(d)
                        .zip(g.chunks(d))
                        .zip(xhat.chunks(d))
                        .enumerate()
                    {
                        for j in 0..d {
                            dxhat[j] = gr[j] * gv[j];
                        }
                        let mean_dxhat = dxhat.iter().copied().sum::<T>() * inv_d;
                        let mean_dxhat_xhat =
                            dxhat.iter().zip(xr).map(|(&a, &b)| a * b).sum::<T>() * inv_d;
                        for j in 0..d {
                            dr[j] += rstd[r] * (dxhat[j] - mean_dxhat - xr[j] * mean_dxhat_xhat);
                        }
                    }
                }
            }
            Op::Dropout { x, mask } => {
                let dx = buf(grads, *x, g.len());
                for ((d, &gv), &m) in dx.iter_mut().zip(g).zip(mask) {
                    *d += gv * m;
                }
            }
            Op::ConcatCols(parts) => {
                let total = out.cols();
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    if self.wants(p) {
                        let dp = buf(grads, p, self.value(p).len());
                        for (dr, gr) in dp.chunks_mut(w).zip(g.chunks(total)) {
                            axpy(dr, &gr[offset..offset + w]);
                        }
                    }
                    offset += w;
                }
            }
            Op::SliceCols { x, start } => {
                let xv = self.value(*x);
                let (w, total) = (out.cols(), xv.cols());
                let dx = buf(grads, *x, xv.len());
                for (dr, gr) in dx.chunks_mut(total).zip(g.chunks(w)) {
                    axpy(&mut dr[*start..*start + w], gr);
                }
            }
            Op::Reshape(x) => axpy(buf(grads, *x, g.len()), g),
            Op::ReplaceRows { x, token, rows } => {
                let d = out.cols();
                if self.wants(*x) {
                    let dx = buf(grads, *x, g.len());
                    let mut replaced = vec![false; g.len() / d];
                    for &r in rows {
                        replaced[r] = true;
                    }
                    for ((dr, gr), &skip) in dx.chunks_mut(d).zip(g.chunks(d)).zip(&replaced) {
                        if !skip {
                            axpy(dr, gr);
                        }
                    }
                }
                if self.wants(*token) {
                    let dt = buf(grads, *token, d);
                    for &r in rows {
                        axpy(dt, &g[r * d..(r + 1) * d]);
                    }
                }
            }
            Op::Attention {
                qkv,
                heads,
                group,
                probs,
            } => {
                let qv = self.value(*qkv);
                let (rows, d_model) = (qv.rows(), qv.cols() / 3);
                let dq = buf(grads, *qkv, qv.len());
                ops::attention_backward(qv.data(), probs, g, dq, rows, d_model, *heads, *group);
            }
            Op::CrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let k = self.value(*logits).cols();
                let scale = g[0] / T::from_usize(labels.len()).unwrap();
                let dl = buf(grads, *logits, probs.len());
                for (r, &label) in labels.iter().enumerate() {
                    for j in 0..k {
                        let onehot = if j == label { T::one() } else { T::zero() };
                        dl[r * k + j] += (probs[r * k + j] - onehot) * scale;
                    }
                }
            }
            Op::Mse {
                pred,
                target,
                rows,
                count,
            } => {
                if *count == 0 {
                    return;
                }
                let pv = self.value(*pred);
                let d = pv.cols();
                let two = T::from_f64_lossy(2.0) * g[0] / T::from_usize(*count).unwrap();
                let dp = buf(grads, *pred, pv.len());
                for r in 0..pv.rows() {
                    if rows.as_ref().is_none_or(|s| s[r]) {
                        for j in 0..d {
                            let idx = r * d + j;
                            dp[idx] += two * (pv.data()[idx] - target[idx]);
                        }
                    }
                }
            }
            Op::Sum(x) => {
                let dx = buf(grads, *x, self.value(*x).len());
                for d in dx.iter_mut() {
                    *d += g[0];
                }
            }
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }
}

fn buf<T: Real>(grads: &mut [Option<Vec<T>>], v: Var, len: usize) -> &mut [T] {
    grads[v.0].get_or_insert_with(|| vec![T::zero(); len])
}

fn axpy<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
