use super::config::{Phase, TrainConfig};
use super::fit::{fit, FitOutcome};
use super::freeze::FreezeSpec;
use crate::dataset::SignalRecord;
use crate::error::{Error, Result};
use crate::heads::HeadKind;
use crate::model::{Model, ModelConfig, TargetNorm};

fn expect_phase(cfg: &TrainConfig, phase: Phase) -> Result<()> {
    if cfg.phase != phase {
        return Err(Error::Config(format!(
            "{} called with a {} config",
            phase.name(),
            cfg.phase.name()
        )));
    }
    Ok(())
}

/// Trains embedding, encoder and a classification head end to end.
/// Labels must index `classes`.
pub fn pretrain_supervised(
    train: &[SignalRecord],
    val: &[SignalRecord],
    classes: Vec<String>,
    config: ModelConfig,
    cfg: &TrainConfig,
) -> Result<(Model, FitOutcome)> {
    expect_phase(cfg, Phase::PretrainSupervised)?;
    let head = HeadKind::Classification {
        classes: classes.len(),
    };
    let mut model = Model::new(config, head, classes, cfg.seed)?;
    let freeze = FreezeSpec::all(&model.params);
    let outcome = fit(&mut model, train, val, &freeze, cfg)?;
    model.provenance.phase = Some(cfg.phase.name().into());
    Ok((model, outcome))
}

/// Masked-patch reconstruction. Labels are ignored.
pub fn pretrain_ssl(
    train: &[SignalRecord],
    val: &[SignalRecord],
    config: ModelConfig,
    cfg: &TrainConfig,
) -> Result<(Model, FitOutcome)> {
    expect_phase(cfg, Phase::PretrainSsl)?;
    let mut model = Model::new(config, HeadKind::Reconstruction, Vec::new(), cfg.seed)?;
    let freeze = FreezeSpec::all(&model.params);
    let outcome = fit(&mut model, train, val, &freeze, cfg)?;
    model.provenance.phase = Some(cfg.phase.name().into());
    Ok((model, outcome))
}

/// Fine-tuning target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FinetuneTask {
    Classification { classes: Vec<String> },
    Regression,
}

/// Drops the pre-training head, attaches a fresh head of width
/// `finetune_head_hidden`, and trains only the last encoder layer and the
/// head. Every other parameter keeps its exact bytes.
pub fn finetune(
    pretrained: &Model,
    train: &[SignalRecord],
    val: &[SignalRecord],
    task: FinetuneTask,
    cfg: &TrainConfig,
) -> Result<(Model, FitOutcome)> {
    let expected = match task {
        FinetuneTask::Classification { .. } => Phase::FinetuneCls,
        FinetuneTask::Regression => Phase::FinetuneReg,
    };
    expect_phase(cfg, expected)?;
    let mut model = pretrained.clone();
    let (head, classes, norm) = match task {
        FinetuneTask::Classification { classes } => (
            HeadKind::Classification {
                classes: classes.len(),
            },
            classes,
            None,
        ),
        FinetuneTask::Regression => {
            let labels = train
                .iter()
                .map(|r| r.ranging_error_mm.map(f64::from))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| Error::LabelFamily {
                    expected: "ranging".into(),
                    found: "classification".into(),
                })?;
            (
                HeadKind::Regression,
                Vec::new(),
                Some(TargetNorm::fit(&labels)),
            )
        }
    };
    let width = model.config.finetune_head_hidden;
    model
        .params
        .replace_head(&model.config, head, width, cfg.seed);
    model.head = head;
    model.classes = classes;
    model.target_norm = norm;
    model.check_head()?;
    let freeze = FreezeSpec::finetune(&model.params, model.config.layers);
    let outcome = fit(&mut model, train, val, &freeze, cfg)?;
    model.provenance.phase = Some(cfg.phase.name().into());
    Ok((model, outcome))
}
