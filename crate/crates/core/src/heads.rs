//! Task heads over the encoded channels.
//!
//! Classification and regression share the two-layer form
//! `W₁ · ReLU(W₂ f + b₂) + b₁` over the flattened features
//! `f = [ẑ_r ‖ ẑ_i]`; reconstruction maps every token back to a patch.
//! Weights are stored input-major, so on the tape the head reads
//! `ReLU(f·W₂ + b₂)·W₁ + b₁`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ops::matmul;
use crate::numerics::{Real, Tape, Tensor, Var};

/// Which head a model carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum HeadKind {
    Classification { classes: usize },
    Regression,
    Reconstruction,
}

impl HeadKind {
    /// Parameter-name prefix of this head.
    pub fn prefix(&self) -> &'static str {
        match self {
            HeadKind::Classification { .. } => "head.cls",
            HeadKind::Regression => "head.reg",
            HeadKind::Reconstruction => "head.rec",
        }
    }
}

/// `[ẑ_r ‖ ẑ_i]` flattened row-major: channel r tokens, then channel i.
pub fn flatten_features<T: Real>(zr: &Tensor<T>, zi: &Tensor<T>) -> Result<Vec<T>> {
    if zr.shape() != zi.shape() {
        return Err(Error::shape(
            "flatten_features",
            format!("{:?} vs {:?}", zr.shape(), zi.shape()),
        ));
    }
    Ok(zr.data().iter().chain(zi.data()).copied().collect())
}

/// Two-layer head on one feature vector. `w2: F × hidden`, `w1: hidden × out`.
pub fn two_layer<T: Real>(
    f: &[T],
    w2: &Tensor<T>,
    b2: &Tensor<T>,
    w1: &Tensor<T>,
    b1: &Tensor<T>,
) -> Result<Vec<T>> {
    if f.len() != w2.rows() {
        return Err(Error::shape(
            "head",
            format!("features of width {} into {:?}", f.len(), w2.shape()),
        ));
    }
    let x = Tensor::new(&[1, f.len()], f.to_vec())?;
    let mut h = matmul(&x, w2)?;
    for (v, &b) in h.data_mut().iter_mut().zip(b2.data()) {
        *v = (*v + b).max(T::zero());
    }
    let mut out = matmul(&h, w1)?;
    for (v, &b) in out.data_mut().iter_mut().zip(b1.data()) {
        *v += b;
    }
    Ok(out.into_data())
}

/// Class logits (no softmax).
pub fn classify<T: Real>(
    f: &[T],
    w2: &Tensor<T>,
    b2: &Tensor<T>,
    w1: &Tensor<T>,
    b1: &Tensor<T>,
) -> Result<Vec<T>> {
    two_layer(f, w2, b2, w1, b1)
}

/// Scalar prediction.
pub fn regress<T: Real>(
    f: &[T],
    w2: &Tensor<T>,
    b2: &Tensor<T>,
    w1: &Tensor<T>,
    b1: &Tensor<T>,
) -> Result<T> {
    if w1.cols() != 1 {
        return Err(Error::shape(
            "regress",
            format!("output weight {:?} must have one column", w1.shape()),
        ));
    }
    Ok(two_layer(f, w2, b2, w1, b1)?[0])
}

/// Per-token patch reconstruction `ẑ·W_rec + b_rec` (`N × P`).
pub fn reconstruct<T: Real>(z: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    crate::patch::embed(z, w, b)
}

/// Tape handles for a two-layer head.
#[derive(Clone, Copy, Debug)]
pub struct TwoLayerVars {
    pub w2: Var,
    pub b2: Var,
    pub w1: Var,
    pub b1: Var,
}

/// Tape handles for the reconstruction head.
#[derive(Clone, Copy, Debug)]
pub struct ReconVars {
    pub w: Var,
    pub b: Var,
}

/// `encoded` is `B·2·N × D` in record/channel/token order; the result is
/// `B × 2·N·D`, each row one record's flattened features.
pub fn flatten_batch<T: Real>(tape: &mut Tape<'_, T>, encoded: Var, batch: usize) -> Result<Var> {
    let width = tape.value(encoded).len() / batch.max(1);
    tape.reshape(encoded, &[batch, width])
}

pub fn two_layer_on_tape<T: Real>(tape: &mut Tape<'_, T>, f: Var, p: &TwoLayerVars) -> Result<Var> {
    let h = tape.matmul(f, p.w2)?;
    let h = tape.add_bias(h, p.b2)?;
    let h = tape.relu(h)?;
    let o = tape.matmul(h, p.w1)?;
    tape.add_bias(o, p.b1)
}

pub fn reconstruct_on_tape<T: Real>(
    tape: &mut Tape<'_, T>,
    encoded: Var,
    p: &ReconVars,
) -> Result<Var> {
    let o = tape.matmul(encoded, p.w)?;
    tape.add_bias(o, p.b)
}
