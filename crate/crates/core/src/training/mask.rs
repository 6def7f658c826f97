use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// Masked raw patches are zeroed before projection.
    Zero,
    /// Masked tokens are replaced by a learned vector after projection.
    LearnedToken,
}

/// Masked patch indices per record, shared by both channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskPlan {
    pub n_patches: usize,
    pub masked: Vec<Vec<usize>>,
}

/// `round(ratio · N)` patches masked per record.
pub fn masked_count(ratio: f64, n_patches: usize) -> usize {
    ((ratio * n_patches as f64).round() as usize).min(n_patches)
}

impl MaskPlan {
    pub fn draw<R: Rng + ?Sized>(
        records: usize,
        n_patches: usize,
        ratio: f64,
        rng: &mut R,
    ) -> Result<MaskPlan> {
        if !(0.0..1.0).contains(&ratio) {
            return Err(Error::Config(format!(
                "mask ratio {ratio} must lie in [0, 1)"
            )));
        }
        let k = masked_count(ratio, n_patches);
        let masked = (0..records)
            .map(|_| {
                let mut idx = sample(rng, n_patches, k).into_vec();
                idx.sort_unstable();
                idx
            })
            .collect();
        Ok(MaskPlan { n_patches, masked })
    }

    /// Row indices into a `B·2·N` token matrix covered by the plan.
    pub fn rows(&self) -> Vec<usize> {
        let n = self.n_patches;
        let mut rows = Vec::new();
        for (r, idx) in self.masked.iter().enumerate() {
            for c in 0..2 {
                rows.extend(idx.iter().map(|&k| (2 * r + c) * n + k));
            }
        }
        rows
    }

    /// Per-row flag, true where the row is masked.
    pub fn row_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.masked.len() * 2 * self.n_patches];
        for r in self.rows() {
            flags[r] = true;
        }
        flags
    }
}

/// Copy of `patches` (`B·2·N × P`) with every masked row zeroed; the input
/// is left untouched.
pub fn mask_patches<T: Real>(patches: &Tensor<T>, plan: &MaskPlan) -> Result<Tensor<T>> {
    let rows = patches.rows();
    if rows != plan.masked.len() * 2 * plan.n_patches
        || plan.masked.iter().flatten().any(|&k| k >= plan.n_patches)
    {
        return Err(Error::shape(
            "mask_patches",
            format!("plan for {} records on {rows} rows", plan.masked.len()),
        ));
    }
    let mut out = patches.clone();
    let p = patches.cols();
    for r in plan.rows() {
        out.data_mut()[r * p..(r + 1) * p]
            .iter_mut()
            .for_each(|v| *v = T::zero());
    }
    Ok(out)
}
