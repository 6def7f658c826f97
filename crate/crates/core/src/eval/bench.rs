//! Patch-size sweep: accuracy after a short fixed budget, wall time per
//! epoch, stored activation scalars and attention cost, with `S = P`.

use serde::{Deserialize, Serialize};

use super::metrics::evaluate_classification;
use crate::dataset::SignalRecord;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::training::{pretrain_supervised, Phase, TrainConfig};

pub const DEFAULT_PATCH_SIZES: [usize; 5] = [32, 64, 128, 256, 512];
/// Epoch budget of the short-train accuracy column.
pub const BENCH_EPOCHS: usize = 5;

/// Attention multiply-accumulates of one layer on one `N`-token sequence:
/// `H·(2·N²·d_k)` for scores and weighted values plus `4·N·D²` for the Q,
/// K, V and output projections.
pub fn attention_macs(n_patches: usize, d_model: usize, heads: usize) -> u64 {
    let (n, d, h) = (n_patches as u64, d_model as u64, heads as u64);
    let dk = d / h;
    h * 2 * n * n * dk + 4 * n * d * d
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub patch_len: usize,
    pub n_patches: usize,
    pub accuracy: f64,
    pub seconds_per_epoch: f64,
    pub activation_scalars_peak: usize,
    /// Per layer and channel sequence, see [`attention_macs`].
    pub attention_macs: u64,
    pub param_count: usize,
}

/// The swept configuration for patch length `p`.
pub fn sweep_config(base: &ModelConfig, p: usize) -> Result<ModelConfig> {
    if p == 0 || base.length % p != 0 {
        return Err(Error::Config(format!(
            "patch size {p} does not divide length {}",
            base.length
        )));
    }
    let cfg = ModelConfig {
        patch_len: p,
        stride: p,
        ..*base
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Trains a fresh supervised model per patch size on the same records
/// and reports one row each. Runs serially so timings are comparable.
pub fn complexity_benchmark(
    train: &[SignalRecord],
    test: &[SignalRecord],
    classes: &[String],
    base: &ModelConfig,
    patch_sizes: &[usize],
    train_cfg: &TrainConfig,
) -> Result<Vec<BenchRow>> {
    let configs = patch_sizes
        .iter()
        .map(|&p| sweep_config(base, p))
        .collect::<Result<Vec<_>>>()?;
    let cfg = TrainConfig {
        phase: Phase::PretrainSupervised,
        target_val_accuracy: None,
        ..train_cfg.clone()
    };
    let mut rows = Vec::with_capacity(configs.len());
    for mc in configs {
        let (model, out) = pretrain_supervised(train, test, classes.to_vec(), mc, &cfg)?;
        let report = evaluate_classification(&model, test, cfg.eval_batch_size)?;
        let secs = out.epoch_seconds.iter().sum::<f64>() / out.epoch_seconds.len().max(1) as f64;
        rows.push(BenchRow {
            patch_len: mc.patch_len,
            n_patches: mc.n_patches(),
            accuracy: report.accuracy.unwrap_or(0.0),
            seconds_per_epoch: secs,
            activation_scalars_peak: out.activation_scalars_peak,
            attention_macs: attention_macs(mc.n_patches(), mc.d_model, mc.heads),
            param_count: model.params.scalar_count(|_| true),
        });
    }
    Ok(rows)
}

pub fn bench_table(rows: &[BenchRow]) -> String {
    let mut s = format!(
        "{:>6} {:>5} {:>9} {:>10} {:>14} {:>14} {:>10}\n",
        "P", "N", "accuracy", "s/epoch", "activations", "attn_macs", "params"
    );
    for r in rows {
        s += &format!(
            "{:>6} {:>5} {:>9.4} {:>10.3} {:>14} {:>14} {:>10}\n",
            r.patch_len,
            r.n_patches,
            r.accuracy,
            r.seconds_per_epoch,
            r.activation_scalars_peak,
            r.attention_macs,
            r.param_count
        );
    }
    s
}
