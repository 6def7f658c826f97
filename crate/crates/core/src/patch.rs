//! Patch tokenization: per-channel segmentation, linear projection and
//! positional encoding.
//!
//! Projection weights are stored input-major (`P × D`), so a token is
//! `patch · W + b`; this is the transpose of writing `W·x + b` with a
//! `D × P` matrix and computes the same map. The projection and position
//! table are shared by both channels.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::SignalRecord;
use crate::error::{Error, Result};
use crate::numerics::{ops, Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchConfig {
    pub length: usize,
    pub patch_len: usize,
    pub stride: usize,
    pub d_model: usize,
    pub dropout: f64,
}

impl PatchConfig {
    pub fn n_patches(&self) -> Result<usize> {
        n_patches(self.length, self.patch_len, self.stride)
    }
}

/// `floor((L − P) / S) + 1`.
pub fn n_patches(length: usize, patch_len: usize, stride: usize) -> Result<usize> {
    if patch_len == 0 || stride == 0 || patch_len > length {
        return Err(Error::Config(format!(
            "patch length {patch_len} and stride {stride} do not fit length {length}"
        )));
    }
    Ok((length - patch_len) / stride + 1)
}

/// `N × P` matrix whose row `k` is `channel[k·S .. k·S + P]`.
pub fn segment<T: Real>(channel: &[f32], cfg: &PatchConfig) -> Result<Tensor<T>> {
    if channel.len() != cfg.length {
        return Err(Error::shape(
            "segment",
            format!(
                "channel of {} samples, expected {}",
                channel.len(),
                cfg.length
            ),
        ));
    }
    let n = cfg.n_patches()?;
    let p = cfg.patch_len;
    let mut data = Vec::with_capacity(n * p);
    for k in 0..n {
        data.extend(
            channel[k * cfg.stride..k * cfg.stride + p]
                .iter()
                .map(|&v| T::from_f64_lossy(v as f64)),
        );
    }
    Tensor::new(&[n, p], data)
}

/// Patches of a batch of records, stacked as `B·2·N × P`: record-major,
/// then channel, then patch index.
pub fn segment_batch<T: Real>(records: &[&SignalRecord], cfg: &PatchConfig) -> Result<Tensor<T>> {
    let n = cfg.n_patches()?;
    let mut data = Vec::with_capacity(records.len() * 2 * n * cfg.patch_len);
    for r in records {
        for c in 0..2 {
            data.extend(segment::<T>(r.channel(c), cfg)?.into_data());
        }
    }
    Tensor::new(&[records.len() * 2 * n, cfg.patch_len], data)
}

/// Inverse of [`segment`] over the covered samples when `P == S`: the
/// first `N·P` samples of the channel.
pub fn unpatch<T: Real>(patches: &Tensor<T>) -> Vec<T> {
    patches.data().to_vec()
}

/// `patches · W + b` for `W: P × D`, `b: D`.
pub fn embed<T: Real>(patches: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if b.len() != w.cols() {
        return Err(Error::shape(
            "embed",
            format!("weight {:?} with bias {:?}", w.shape(), b.shape()),
        ));
    }
    let mut z = ops::matmul(patches, w)?;
    let d = z.cols();
    for row in z.data_mut().chunks_mut(d) {
        for (v, &bias) in row.iter_mut().zip(b.data()) {
            *v += bias;
        }
    }
    Ok(z)
}

/// `dropout(z + E_pos)`; the plain sum outside training.
pub fn add_position<T: Real, R: Rng + ?Sized>(
    z: &Tensor<T>,
    pos: &Tensor<T>,
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<Tensor<T>> {
    if z.shape() != pos.shape() {
        return Err(Error::shape(
            "add_position",
            format!("{:?} vs {:?}", z.shape(), pos.shape()),
        ));
    }
    let mut sum = z.clone();
    sum.add_assign(pos)?;
    ops::dropout(&sum, rate, training, rng)
}
