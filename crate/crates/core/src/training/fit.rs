use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::freeze::FreezeSpec;
use super::mask::{mask_patches, MaskMode, MaskPlan};
use super::optim::{AdamW, PlateauScheduler};
use crate::dataset::{batch_iter, standardize, SignalRecord};
use crate::error::{Error, Result};
use crate::heads::HeadKind;
use crate::model::{encode_batch, head_output, Bound, Model};
use crate::numerics::rng::{stream, tag, StreamRng};
use crate::numerics::{Tape, Tensor, Var};
use crate::patch::segment_batch;

/// One line of training history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mae_mm: Option<f64>,
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub rows: Vec<HistoryRow>,
}

impl History {
    pub fn epochs(&self) -> usize {
        self.rows.iter().map(|r| r.epoch).max().unwrap_or(0)
    }

    pub fn split(&self, split: &str) -> impl Iterator<Item = &HistoryRow> {
        let split = split.to_string();
        self.rows.iter().filter(move |r| r.split == split)
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.rows {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(Error::io(path))?;
        f.write_all(self.to_jsonl()?.as_bytes())
            .map_err(Error::io(path))
    }
}

/// Result of a training run. `history`, `best_epoch`, `steps` and
/// `activation_scalars_peak` are deterministic; `epoch_seconds` is not.
#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub history: History,
    pub best_epoch: usize,
    pub steps: usize,
    pub activation_scalars_peak: usize,
    pub epoch_seconds: Vec<f64>,
}

/// Epoch-level metrics of one pass over a split.
#[derive(Clone, Copy, Debug, Default)]
struct PassStats {
    loss_sum: f64,
    correct: usize,
    abs_err_sum: f64,
    count: usize,
}

impl PassStats {
    fn row(&self, epoch: usize, split: &str, head: HeadKind, lr: f64) -> HistoryRow {
        let n = self.count.max(1) as f64;
        HistoryRow {
            epoch,
            split: split.into(),
            loss: self.loss_sum / n,
            accuracy: matches!(head, HeadKind::Classification { .. })
                .then(|| self.correct as f64 / n),
            mae_mm: matches!(head, HeadKind::Regression).then(|| self.abs_err_sum / n),
            lr,
        }
    }
}

/// Class index a classification head is trained against: the record's
/// label, or LOS (0) / NLOS (1) for ranging records.
pub fn class_target(r: &SignalRecord) -> Option<usize> {
    r.label.or(r.los.map(|los| usize::from(!los)))
}

fn check_targets(model: &Model, records: &[SignalRecord]) -> Result<()> {
    for r in records {
        if r.length() != model.config.length {
            return Err(Error::Config(format!(
                "record {} has length {}, model expects {}",
                r.id,
                r.length(),
                model.config.length
            )));
        }
        match model.head {
            HeadKind::Classification { classes } => {
                let label = class_target(r).ok_or_else(|| Error::LabelFamily {
                    expected: "classification".into(),
                    found: "unlabeled".into(),
                })?;
                if label >= classes {
                    return Err(Error::Label { label, classes });
                }
            }
            HeadKind::Regression if r.ranging_error_mm.is_none() => {
                return Err(Error::LabelFamily {
                    expected: "ranging".into(),
                    found: "classification".into(),
                });
            }
            _ => {}
        }
    }
    Ok(())
}

struct StepOutput {
    loss: Var,
    output: Var,
}

/// Forward pass plus loss for one batch. `masks` draws the SSL corruption;
/// `dropout` is present only in training mode.
fn forward<'a>(
    tape: &mut Tape<'a, f32>,
    bound: &Bound,
    model: &Model,
    batch: &[&SignalRecord],
    cfg: &TrainConfig,
    masks: &mut StreamRng,
    dropout: &mut Option<&mut StreamRng>,
) -> Result<StepOutput> {
    let mcfg = &model.config;
    let patches = segment_batch::<f32>(batch, &mcfg.patch())?;
    match model.head {
        HeadKind::Reconstruction => {
            let plan = MaskPlan::draw(batch.len(), mcfg.n_patches(), cfg.mask_ratio, masks)?;
            let (input, rows) = match cfg.mask_mode {
                MaskMode::Zero => (mask_patches(&patches, &plan)?, None),
                MaskMode::LearnedToken => (patches.clone(), Some(plan.rows())),
            };
            let encoded = encode_batch(tape, bound, mcfg, input, rows.as_deref(), dropout)?;
            let output = head_output(tape, bound, model.head, encoded, batch.len())?;
            let flags = cfg.masked_only_loss.then(|| plan.row_flags());
            let loss = tape.mse_rows(output, &patches, flags.as_deref())?;
            Ok(StepOutput { loss, output })
        }
        HeadKind::Classification { .. } => {
            let encoded = encode_batch(tape, bound, mcfg, patches, None, dropout)?;
            let output = head_output(tape, bound, model.head, encoded, batch.len())?;
            let labels: Vec<usize> = batch
                .iter()
                .map(|r| class_target(r).expect("checked"))
                .collect();
            let loss = tape.cross_entropy(output, &labels)?;
            Ok(StepOutput { loss, output })
        }
        HeadKind::Regression => {
            let norm = model.target_norm.ok_or_else(|| {
                Error::Config("regression model without target normalization".into())
            })?;
            let encoded = encode_batch(tape, bound, mcfg, patches, None, dropout)?;
            let output = head_output(tape, bound, model.head, encoded, batch.len())?;
            let target = batch
                .iter()
                .map(|r| norm.normalize(r.ranging_error_mm.expect("checked") as f64) as f32)
                .collect();
            let loss = tape.mse(output, &Tensor::new(&[batch.len(), 1], target)?)?;
            Ok(StepOutput { loss, output })
        }
    }
}

fn accumulate(
    stats: &mut PassStats,
    model: &Model,
    batch: &[&SignalRecord],
    loss: f64,
    output: &Tensor<f32>,
) {
    stats.loss_sum += loss * batch.len() as f64;
    stats.count += batch.len();
    match model.head {
        HeadKind::Classification { .. } => {
            for (r, row) in batch.iter().zip(output.data().chunks(output.cols())) {
                if Some(argmax(row)) == class_target(r) {
                    stats.correct += 1;
                }
            }
        }
        HeadKind::Regression => {
            let norm = model.target_norm.expect("checked");
            for (r, &z) in batch.iter().zip(output.data()) {
                let pred = norm.denormalize(z as f64);
                stats.abs_err_sum += (pred - r.ranging_error_mm.expect("checked") as f64).abs();
            }
        }
        HeadKind::Reconstruction => {}
    }
}

/// Index of the largest value; the first one on ties.
pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Eval-mode pass over `records` (already standardized). SSL masks come from
/// a fixed stream so every epoch scores the same corruption.
fn evaluate_pass(model: &Model, records: &[SignalRecord], cfg: &TrainConfig) -> Result<PassStats> {
    let mut stats = PassStats::default();
    for (b, chunk) in records.chunks(cfg.eval_batch_size).enumerate() {
        let batch: Vec<&SignalRecord> = chunk.iter().collect();
        let mut masks = stream(cfg.seed, &[tag("val-mask"), b as u64]);
        let mut tape = Tape::new();
        let bound = Bound::new(&mut tape, &model.params, |_| false);
        let out = forward(&mut tape, &bound, model, &batch, cfg, &mut masks, &mut None)?;
        let loss = tape.value(out.loss).data()[0] as f64;
        accumulate(&mut stats, model, &batch, loss, tape.value(out.output));
    }
    Ok(stats)
}

/// Trains the parameters `freeze` marks trainable with AdamW and the
/// plateau scheduler, keeping the parameters of the epoch with the lowest
/// validation loss. Records are standardized per channel here.
pub fn fit(
    model: &mut Model,
    train: &[SignalRecord],
    val: &[SignalRecord],
    freeze: &FreezeSpec,
    cfg: &TrainConfig,
) -> Result<FitOutcome> {
    cfg.validate()?;
    model.config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Insufficient(format!(
            "{} training and {} validation records",
            train.len(),
            val.len()
        )));
    }
    check_targets(model, train)?;
    check_targets(model, val)?;
    let train: Vec<SignalRecord> = train.iter().map(standardize).collect();
    let val: Vec<SignalRecord> = val.iter().map(standardize).collect();

    let mut optim = AdamW::<f32>::default();
    let mut sched = PlateauScheduler::new(cfg.lr, cfg.scheduler);
    let mut history = History::default();
    let mut best: Option<(f64, usize, crate::model::ParamStore)> = None;
    let mut epoch_seconds = Vec::new();
    let mut peak = 0usize;
    let mut steps = 0usize;

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let lr = sched.lr();
        let mut stats = PassStats::default();
        let order = batch_iter(
            train.len(),
            cfg.batch_size,
            true,
            stream_seed(cfg.seed, epoch),
        )?;
        for (b, idx) in order.iter().enumerate() {
            let batch: Vec<&SignalRecord> = idx.iter().map(|&i| &train[i]).collect();
            let mut masks = stream(cfg.seed, &[tag("mask"), epoch as u64, b as u64]);
            let mut drop_rng = stream(cfg.seed, &[tag("dropout"), epoch as u64, b as u64]);
            let grads = {
                let mut tape = Tape::new();
                let bound = Bound::new(&mut tape, &model.params, |n| freeze.is_trainable(n));
                let out = forward(
                    &mut tape,
                    &bound,
                    model,
                    &batch,
                    cfg,
                    &mut masks,
                    &mut Some(&mut drop_rng),
                )
                .map_err(|e| at_step(e, steps + 1))?;
                peak = peak.max(tape.stored_scalars());
                let loss = tape.value(out.loss).data()[0] as f64;
                if !loss.is_finite() {
                    return Err(Error::Training {
                        step: steps + 1,
                        detail: format!("loss is {loss}"),
                    });
                }
                accumulate(&mut stats, model, &batch, loss, tape.value(out.output));
                let mut g = tape
                    .backward(out.loss, 1.0)
                    .map_err(|e| at_step(e, steps + 1))?;
                bound
                    .iter()
                    .filter(|(name, _)| freeze.is_trainable(name))
                    .filter_map(|(name, v)| g.take(v).map(|t| (name.to_string(), t)))
                    .collect::<Vec<_>>()
            };
            steps += 1;
            optim.step(&mut model.params, &grads, lr, cfg.weight_decay)?;
        }
        let val_stats = evaluate_pass(model, &val, cfg)?;
        history.rows.push(stats.row(epoch, "train", model.head, lr));
        let val_row = val_stats.row(epoch, "val", model.head, lr);
        let val_loss = val_row.loss;
        let val_acc = val_row.accuracy;
        history.rows.push(val_row);
        if !val_loss.is_finite() {
            return Err(Error::Training {
                step: steps,
                detail: format!("validation loss is {val_loss}"),
            });
        }
        if best.as_ref().is_none_or(|(l, _, _)| val_loss < *l) {
            best = Some((val_loss, epoch, model.params.clone()));
        }
        epoch_seconds.push(started.elapsed().as_secs_f64());
        let next_lr = sched.step(val_loss);
        let reached = matches!((cfg.target_val_accuracy, val_acc), (Some(t), Some(a)) if a >= t);
        if reached || next_lr < cfg.scheduler.min_lr {
            break;
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    model.params = params;
    model.provenance.best_epoch = Some(best_epoch);
    Ok(FitOutcome {
        history,
        best_epoch,
        steps,
        activation_scalars_peak: peak,
        epoch_seconds,
    })
}

/// Numeric blow-ups inside a step become training errors at that step.
fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::NonFinite { op } => Error::Training {
            step,
            detail: format!("non-finite value produced by {op}"),
        },
        other => other,
    }
}

fn stream_seed(seed: u64, epoch: usize) -> u64 {
    crate::numerics::rng::stream_id(&[seed, tag("epoch"), epoch as u64])
}
