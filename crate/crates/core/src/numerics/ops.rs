//! Forward kernels shared by the tape and by callers that need no gradients.

use rand::Rng;

use super::{Real, Tensor};
use crate::error::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

fn check_matrix<T: Real>(op: &'static str, t: &Tensor<T>) -> Result<()> {
    if t.shape().len() != 2 {
        return Err(Error::shape(
            op,
            format!("expected a matrix, got shape {:?}", t.shape()),
        ));
    }
    Ok(())
}

/// `a·b` for `a: m×k`, `b: k×n`.
pub fn matmul<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    check_matrix("matmul", a)?;
    check_matrix("matmul", b)?;
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    if b.rows() != k {
        return Err(Error::shape(
            "matmul",
            format!("{:?} · {:?}", a.shape(), b.shape()),
        ));
    }
    let mut out = Tensor::zeros(&[m, n]);
    T::gemm(
        m,
        k,
        n,
        T::one(),
        a.data(),
        k as isize,
        1,
        b.data(),
        n as isize,
        1,
        T::zero(),
        out.data_mut(),
        n as isize,
        1,
    );
    Ok(out)
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let mut out = x.clone();
    let cols = x.cols();
    for row in out.data_mut().chunks_mut(cols) {
        softmax_in_place(row);
    }
    out
}

pub(crate) fn softmax_in_place<T: Real>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// Layer normalization statistics kept for the backward pass.
pub(crate) struct NormParts<T> {
    pub out: Vec<T>,
    pub xhat: Vec<T>,
    pub rstd: Vec<T>,
}

pub(crate) fn layer_norm_parts<T: Real>(x: &[T], d: usize, gain: &[T], bias: &[T]) -> NormParts<T> {
    let eps = T::from_f64_lossy(LAYER_NORM_EPS);
    let inv_d = T::one() / T::from_usize(d).unwrap();
    let mut out = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut rstd = Vec::with_capacity(x.len() / d);
    for ((row, xh), o) in x.chunks(d).zip(xhat.chunks_mut(d)).zip(out.chunks_mut(d)) {
        let mean = row.iter().copied().sum::<T>() * inv_d;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_d;
        let r = T::one() / (var + eps).sqrt();
        for j in 0..d {
            xh[j] = (row[j] - mean) * r;
            o[j] = xh[j] * gain[j] + bias[j];
        }
        rstd.push(r);
    }
    NormParts { out, xhat, rstd }
}

/// Normalizes every vector along the last axis, then applies `gain`/`bias`.
pub fn layer_norm<T: Real>(x: &Tensor<T>, gain: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let d = x.cols();
    if gain.len() != d || bias.len() != d {
        return Err(Error::shape(
            "layer_norm",
            format!(
                "last dim {d}, gain {:?}, bias {:?}",
                gain.shape(),
                bias.shape()
            ),
        ));
    }
    let parts = layer_norm_parts(x.data(), d, gain.data(), bias.data());
    Tensor::new(x.shape(), parts.out)
}

/// Inverted dropout mask: each entry is 0 with probability `rate`, else
/// `1/(1-rate)`.
pub fn dropout_mask<T: Real, R: Rng + ?Sized>(
    len: usize,
    rate: f64,
    rng: &mut R,
) -> Result<Vec<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!(
            "dropout rate {rate} must lie in [0, 1)"
        )));
    }
    let keep = T::from_f64_lossy(1.0 / (1.0 - rate));
    Ok((0..len)
        .map(|_| {
            if rng.random::<f64>() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect())
}

/// Dropout outside the tape. With `training == false` (or `rate == 0`) the
/// input is returned unchanged, bit for bit.
pub fn dropout<T: Real, R: Rng + ?Sized>(
    x: &Tensor<T>,
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<Tensor<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!(
            "dropout rate {rate} must lie in [0, 1)"
        )));
    }
    if !training || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask::<T, R>(x.len(), rate, rng)?;
    let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    Tensor::new(x.shape(), data)
}

/// Mean negative log-likelihood of `labels` under row-softmaxed `logits`.
/// Returns the loss and the softmax probabilities.
pub fn cross_entropy<T: Real>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    check_matrix("cross_entropy", logits)?;
    let (b, k) = (logits.rows(), logits.cols());
    if labels.len() != b {
        return Err(Error::shape(
            "cross_entropy",
            format!("{b} rows but {} labels", labels.len()),
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Label {
            label: bad,
            classes: k,
        });
    }
    let probs = softmax_rows(logits);
    let mut loss = T::zero();
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
        loss += lse - row[label];
    }
    Ok((loss / T::from_usize(b).unwrap(), probs))
}

/// Mean squared error over all elements.
pub fn mse<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<T> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(
            "mse",
            format!("{:?} vs {:?}", pred.shape(), target.shape()),
        ));
    }
    let n = T::from_usize(pred.len()).unwrap();
    Ok(pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum::<T>()
        / n)
}

/// Multi-head scaled dot-product attention over independent token groups.
///
/// `qkv` is `rows × 3·d_model` holding Q, K and V side by side. Rows are
/// split into consecutive groups of `group` tokens; tokens only attend
/// within their own group. Head `h` uses feature columns
/// `h·d_k .. (h+1)·d_k`. Returns the concatenated head outputs
/// (`rows × d_model`) and the attention probabilities laid out as
/// `[group][head][query][key]`.
pub(crate) fn attention_forward<T: Real>(
    qkv: &[T],
    rows: usize,
    d_model: usize,
    heads: usize,
    group: usize,
) -> (Vec<T>, Vec<T>) {
    let dk = d_model / heads;
    let groups = rows / group;
    let stride = 3 * d_model;
    let scale = T::one() / T::from_usize(dk).unwrap().sqrt();
    let mut out = vec![T::zero(); rows * d_model];
    let mut probs = vec![T::zero(); groups * heads * group * group];
    for g in 0..groups {
        let base = g * group * stride;
        for h in 0..heads {
            let q = &qkv[base + h * dk..];
            let k = &qkv[base + d_model + h * dk..];
            let v = &qkv[base + 2 * d_model + h * dk..];
            let p_off = (g * heads + h) * group * group;
            let p = &mut probs[p_off..p_off + group * group];
            // S = Q·Kᵀ / sqrt(d_k)
            T::gemm(
                group,
                dk,
                group,
                scale,
                q,
                stride as isize,
                1,
                k,
                1,
                stride as isize,
                T::zero(),
                p,
                group as isize,
                1,
            );
            for row in p.chunks_mut(group) {
                softmax_in_place(row);
            }
            let o = &mut out[g * group * d_model + h * dk..];
            T::gemm(
                group,
                group,
                dk,
                T::one(),
                p,
                group as isize,
                1,
                v,
                stride as isize,
                1,
                T::zero(),
                o,
                d_model as isize,
                1,
            );
        }
    }
    (out, probs)
}

/// Gradient of [`attention_forward`] with respect to `qkv`, accumulated into
/// `dqkv`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn attention_backward<T: Real>(
    qkv: &[T],
    probs: &[T],
    dout: &[T],
    dqkv: &mut [T],
    rows: usize,
    d_model: usize,
    heads: usize,
    group: usize,
) {
    let dk = d_model / heads;
    let groups = rows / group;
    let stride = 3 * d_model;
    let scale = T::one() / T::from_usize(dk).unwrap().sqrt();
    let n = group;
    let mut ds = vec![T::zero(); n * n];
    for g in 0..groups {
        let base = g * n * stride;
        for h in 0..heads {
            let p_off = (g * heads + h) * n * n;
            let p = &probs[p_off..p_off + n * n];
            let d_o = &dout[g * n * d_model + h * dk..];
            let v = &qkv[base + 2 * d_model + h * dk..];
            // dP = dO·Vᵀ
            T::gemm(
                n,
                dk,
                n,
                T::one(),
                d_o,
                d_model as isize,
                1,
                v,
                1,
                stride as isize,
                T::zero(),
                &mut ds,
                n as isize,
                1,
            );
            // dS = P ⊙ (dP − rowsum(dP ⊙ P)), folded with the score scale.
            for (dsr, pr) in ds.chunks_mut(n).zip(p.chunks(n)) {
                let dot: T = dsr.iter().zip(pr).map(|(&a, &b)| a * b).sum();
                for (d, &pv) in dsr.iter_mut().zip(pr) {
                    *d = pv * (*d - dot) * scale;
                }
            }
            // dV = Pᵀ·dO
            T::gemm(
                n,
                n,
                dk,
                T::one(),
                p,
                1,
                n as isize,
                d_o,
                d_model as isize,
                1,
                T::one(),
                &mut dqkv[base + 2 * d_model + h * dk..],
                stride as isize,
                1,
            );
            let q = &qkv[base + h * dk..];
            let k = &qkv[base + d_model + h * dk..];
            // dQ = dS·K
            T::gemm(
                n,
                n,
                dk,
                T::one(),
                &ds,
                n as isize,
                1,
                k,
                stride as isize,
                1,
                T::one(),
                &mut dqkv[base + h * dk..],
                stride as isize,
                1,
            );
            // dK = dSᵀ·Q
            T::gemm(
                n,
                n,
                dk,
                T::one(),
                &ds,
                1,
                n as isize,
                q,
                stride as isize,
                1,
                T::one(),
                &mut dqkv[base + d_model + h * dk..],
                stride as isize,
                1,
            );
        }
    }
}
