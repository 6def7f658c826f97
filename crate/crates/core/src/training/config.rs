use serde::{Deserialize, Serialize};

use super::mask::MaskMode;
use super::optim::SchedulerConfig;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PretrainSupervised,
    PretrainSsl,
    FinetuneCls,
    FinetuneReg,
}

impl Phase {
    pub fn is_finetune(self) -> bool {
        matches!(self, Phase::FinetuneCls | Phase::FinetuneReg)
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::PretrainSupervised => "pretrain_supervised",
            Phase::PretrainSsl => "pretrain_ssl",
            Phase::FinetuneCls => "finetune_cls",
            Phase::FinetuneReg => "finetune_reg",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub phase: Phase,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub scheduler: SchedulerConfig,
    /// Upper bound on epochs.
    pub epochs: usize,
    pub mask_ratio: f64,
    pub mask_mode: MaskMode,
    /// Reconstruction loss over masked patches only instead of the whole
    /// signal.
    pub masked_only_loss: bool,
    /// Stop as soon as validation accuracy reaches this fraction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_val_accuracy: Option<f64>,
    pub eval_batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(phase: Phase) -> Self {
        let (lr, weight_decay) = if phase.is_finetune() {
            (1e-5, 1e-5)
        } else {
            (1e-4, 1e-4)
        };
        TrainConfig {
            phase,
            batch_size: 64,
            lr,
            weight_decay,
            scheduler: SchedulerConfig::default(),
            epochs: 100,
            mask_ratio: 0.5,
            mask_mode: MaskMode::LearnedToken,
            masked_only_loss: false,
            target_val_accuracy: None,
            eval_batch_size: 128,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.eval_batch_size == 0 {
            return Err(Error::Config("batch sizes must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite())
            || !(self.weight_decay >= 0.0 && self.lr * self.weight_decay < 1.0)
        {
            return Err(Error::Config(format!(
                "learning rate {} / weight decay {} out of range",
                self.lr, self.weight_decay
            )));
        }
        if !(self.mask_ratio > 0.0 && self.mask_ratio < 1.0) {
            return Err(Error::Config(format!(
                "mask ratio {} must lie in (0, 1)",
                self.mask_ratio
            )));
        }
        let s = &self.scheduler;
        if !(s.factor > 0.0 && s.factor < 1.0) || s.patience == 0 || s.threshold < 0.0 {
            return Err(Error::Config(
                "scheduler factor must lie in (0, 1) with positive patience".into(),
            ));
        }
        Ok(())
    }
}
