//! Supervised and masked self-supervised pre-training, fine-tuning with
//! frozen layers, AdamW and the plateau scheduler.

mod config;
mod fit;
mod freeze;
mod mask;
mod optim;
mod phases;

pub use config::{Phase, TrainConfig};
pub use fit::{argmax, class_target, fit, FitOutcome, History, HistoryRow};
pub use freeze::FreezeSpec;
pub use mask::{mask_patches, masked_count, MaskMode, MaskPlan};
pub use optim::{AdamW, PlateauScheduler, SchedulerConfig};
pub use phases::{finetune, pretrain_ssl, pretrain_supervised, FinetuneTask};
