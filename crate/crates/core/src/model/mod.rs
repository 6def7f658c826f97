//! The full model: parameters, batched forward pass and checkpoints.

mod checkpoint;
mod config;
mod forward;
mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FILE, PARAMS_FILE};
pub use config::ModelConfig;
pub use forward::{encode_batch, head_output, Bound};
pub use params::{ParamStore, INIT_STD};

use serde::{Deserialize, Serialize};

use crate::dataset::{standardize, SignalRecord, SplitAssignment};
use crate::error::{Error, Result};
use crate::heads::HeadKind;
use crate::numerics::Tape;
use crate::patch::segment_batch;

/// Affine normalization of regression targets: the head predicts
/// `(y − mean) / std`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetNorm {
    pub mean: f64,
    pub std: f64,
}

impl TargetNorm {
    pub fn fit(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        TargetNorm {
            mean,
            std: var.sqrt().max(1e-6),
        }
    }

    pub fn normalize(&self, y: f64) -> f64 {
        (y - self.mean) / self.std
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Where a checkpoint came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excluded_class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitAssignment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
}

/// Parameters plus everything needed to interpret them.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub head: HeadKind,
    /// Label space of a classification head, in logit order.
    pub classes: Vec<String>,
    pub target_norm: Option<TargetNorm>,
    pub provenance: Provenance,
}

impl Model {
    /// Fresh model with a pre-training-width head.
    pub fn new(
        config: ModelConfig,
        head: HeadKind,
        classes: Vec<String>,
        seed: u64,
    ) -> Result<Model> {
        let mut model = Model {
            config,
            params: ParamStore::new(),
            head,
            classes,
            target_norm: None,
            provenance: Provenance::default(),
        };
        model.check_head()?;
        model.params = ParamStore::init_backbone(&config, seed)?;
        model
            .params
            .replace_head(&config, head, config.head_hidden, seed);
        Ok(model)
    }

    pub(crate) fn check_head(&self) -> Result<()> {
        if let HeadKind::Classification { classes } = self.head {
            if classes != self.classes.len() || classes == 0 {
                return Err(Error::Config(format!(
                    "classification head of width {classes} with {} class names",
                    self.classes.len()
                )));
            }
        }
        Ok(())
    }

    /// Eval-mode head outputs, one vector per record: logits, the
    /// denormalized regression prediction, or the `2·N·P` reconstruction.
    pub fn infer(&self, records: &[&SignalRecord], batch_size: usize) -> Result<Vec<Vec<f32>>> {
        let mut out = Vec::with_capacity(records.len());
        for chunk in records.chunks(batch_size.max(1)) {
            let prepared: Vec<SignalRecord> = chunk.iter().map(|r| standardize(r)).collect();
            let refs: Vec<&SignalRecord> = prepared.iter().collect();
            let patches = segment_batch::<f32>(&refs, &self.config.patch())?;
            let mut tape = Tape::new();
            let bound = Bound::new(&mut tape, &self.params, |_| false);
            let encoded = encode_batch(&mut tape, &bound, &self.config, patches, None, &mut None)?;
            let y = head_output(&mut tape, &bound, self.head, encoded, chunk.len())?;
            let y = tape.value(y);
            let width = y.len() / chunk.len();
            for row in y.data().chunks(width) {
                let mut v = row.to_vec();
                if let (HeadKind::Regression, Some(norm)) = (self.head, self.target_norm) {
                    v[0] = norm.denormalize(v[0] as f64) as f32;
                }
                out.push(v);
            }
        }
        Ok(out)
    }
}
