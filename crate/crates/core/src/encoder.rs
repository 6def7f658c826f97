//! Pre-norm Transformer encoder applied to each channel's token sequence.
//!
//! On the tape, a batch is one `rows × D` matrix of token groups (one group
//! of `N` tokens per record and channel). Linear maps act row by row and
//! attention stays inside a group, so channels and records never interact.
//!
//! Per layer, with dropout `drop`:
//!
//! ```text
//! z ← z + drop(W_O · drop(Attn(LN₁ z)))
//! z ← z + drop(W₂ · ReLU(W₁ · LN₂ z + b₁) + b₂)
//! ```
//!
//! Attention dropout acts on the per-head outputs `Softmax(QKᵀ/√d_k)·V`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ops::{matmul, softmax_rows};
use crate::numerics::rng::StreamRng;
use crate::numerics::{Real, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub ff_dim: usize,
    pub attn_dropout: f64,
    pub residual_dropout: f64,
}

impl EncoderConfig {
    pub fn d_k(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.d_model == 0 || self.d_model % self.heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        if self.ff_dim == 0 {
            return Err(Error::Config("ff_dim must be positive".into()));
        }
        for r in [self.attn_dropout, self.residual_dropout] {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Config(format!(
                    "dropout rate {r} must lie in [0, 1)"
                )));
            }
        }
        Ok(())
    }
}

/// One head, outside the tape: `Softmax(Q Kᵀ / √d_k) V` with `Q = z W_Q`,
/// `K = z W_K`, `V = z W_V`. Returns the output (`N × d_k`) and the
/// attention matrix (`N × N`).
pub fn attention_head<T: Real>(
    z: &Tensor<T>,
    wq: &Tensor<T>,
    wk: &Tensor<T>,
    wv: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let q = matmul(z, wq)?;
    let k = matmul(z, wk)?;
    let v = matmul(z, wv)?;
    let (n, dk) = (q.rows(), q.cols());
    let scale = T::one() / T::from_usize(dk).unwrap().sqrt();
    let mut scores = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            let dot: T = q.row(i).iter().zip(k.row(j)).map(|(&a, &b)| a * b).sum();
            scores.data_mut()[i * n + j] = dot * scale;
        }
    }
    let probs = softmax_rows(&scores);
    Ok((matmul(&probs, &v)?, probs))
}

fn column_block<T: Real>(w: &Tensor<T>, start: usize, len: usize) -> Result<Tensor<T>> {
    let data = (0..w.rows())
        .flat_map(|r| w.row(r)[start..start + len].iter().copied())
        .collect();
    Tensor::new(&[w.rows(), len], data)
}

/// All heads outside the tape: head `h` uses columns `h·d_k..(h+1)·d_k` of
/// the `D × D` projections; the concatenated outputs go through `W_O`.
pub fn multi_head<T: Real>(
    z: &Tensor<T>,
    wq: &Tensor<T>,
    wk: &Tensor<T>,
    wv: &Tensor<T>,
    wo: &Tensor<T>,
    heads: usize,
) -> Result<Tensor<T>> {
    let d = wq.cols();
    if heads == 0 || d % heads != 0 {
        return Err(Error::Config(format!(
            "{d} columns do not split into {heads} heads"
        )));
    }
    let dk = d / heads;
    let n = z.rows();
    let mut concat = vec![T::zero(); n * d];
    for h in 0..heads {
        let (out, _) = attention_head(
            z,
            &column_block(wq, h * dk, dk)?,
            &column_block(wk, h * dk, dk)?,
            &column_block(wv, h * dk, dk)?,
        )?;
        for i in 0..n {
            concat[i * d + h * dk..i * d + (h + 1) * dk].copy_from_slice(out.row(i));
        }
    }
    matmul(&Tensor::new(&[n, d], concat)?, wo)
}

/// Tape handles for one layer's parameters.
#[derive(Clone, Copy, Debug)]
pub struct LayerVars {
    pub ln1_gain: Var,
    pub ln1_bias: Var,
    pub wq: Var,
    pub wk: Var,
    pub wv: Var,
    pub wo: Var,
    pub ln2_gain: Var,
    pub ln2_bias: Var,
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

/// Parameter names of layer `l`, in [`LayerVars`] field order.
pub fn layer_param_names(l: usize) -> [String; 12] {
    [
        "ln1.gain", "ln1.bias", "attn.wq", "attn.wk", "attn.wv", "attn.wo", "ln2.gain", "ln2.bias",
        "ff.w1", "ff.b1", "ff.w2", "ff.b2",
    ]
    .map(|s| format!("encoder.{l}.{s}"))
}

impl LayerVars {
    pub fn bind(l: usize, mut var: impl FnMut(&str) -> Result<Var>) -> Result<Self> {
        let names = layer_param_names(l);
        let v: Vec<Var> = names.iter().map(|n| var(n)).collect::<Result<_>>()?;
        Ok(LayerVars {
            ln1_gain: v[0],
            ln1_bias: v[1],
            wq: v[2],
            wk: v[3],
            wv: v[4],
            wo: v[5],
            ln2_gain: v[6],
            ln2_bias: v[7],
            w1: v[8],
            b1: v[9],
            w2: v[10],
            b2: v[11],
        })
    }
}

/// Dropout when a training generator is present, identity otherwise.
pub(crate) fn maybe_dropout<T: Real>(
    tape: &mut Tape<'_, T>,
    x: Var,
    rate: f64,
    train: &mut Option<&mut StreamRng>,
) -> Result<Var> {
    match train.as_deref_mut() {
        Some(rng) => tape.dropout(x, rate, rng),
        None => Ok(x),
    }
}

/// One encoder layer over `rows × D` tokens grouped by `group`.
pub fn encoder_layer<T: Real>(
    tape: &mut Tape<'_, T>,
    z: Var,
    p: &LayerVars,
    cfg: &EncoderConfig,
    group: usize,
    train: &mut Option<&mut StreamRng>,
) -> Result<Var> {
    let h = tape.layer_norm(z, p.ln1_gain, p.ln1_bias)?;
    let w_qkv = tape.concat_cols(&[p.wq, p.wk, p.wv])?;
    let qkv = tape.matmul(h, w_qkv)?;
    let heads = tape.attention(qkv, cfg.heads, group)?;
    let heads = maybe_dropout(tape, heads, cfg.attn_dropout, train)?;
    let attn = tape.matmul(heads, p.wo)?;
    let attn = maybe_dropout(tape, attn, cfg.residual_dropout, train)?;
    let z = tape.add(z, attn)?;

    let h = tape.layer_norm(z, p.ln2_gain, p.ln2_bias)?;
    let f = tape.matmul(h, p.w1)?;
    let f = tape.add_bias(f, p.b1)?;
    let f = tape.relu(f)?;
    let f = tape.matmul(f, p.w2)?;
    let f = tape.add_bias(f, p.b2)?;
    let f = maybe_dropout(tape, f, cfg.residual_dropout, train)?;
    tape.add(z, f)
}

/// The full stack; an empty `layers` slice is the identity.
pub fn encode<T: Real>(
    tape: &mut Tape<'_, T>,
    mut z: Var,
    layers: &[LayerVars],
    cfg: &EncoderConfig,
    group: usize,
    train: &mut Option<&mut StreamRng>,
) -> Result<Var> {
    for p in layers {
        z = encoder_layer(tape, z, p, cfg, group, train)?;
    }
    Ok(z)
}
