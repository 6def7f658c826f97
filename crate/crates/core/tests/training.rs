use proptest::prelude::*;
use wavefm::dataset::{RecordMeta, SignalRecord};
use wavefm::heads::HeadKind;
use wavefm::model::{load_checkpoint, save_checkpoint, Model, ModelConfig, ParamStore};
use wavefm::numerics::rng::stream;
use wavefm::numerics::Tensor;
use wavefm::training::*;
use wavefm::Error;

fn tiny() -> ModelConfig {
    ModelConfig {
        length: 64,
        patch_len: 16,
        stride: 16,
        d_model: 8,
        heads: 2,
        layers: 2,
        ff_dim: 16,
        dropout: 0.1,
        attn_dropout: 0.1,
        residual_dropout: 0.1,
        head_hidden: 6,
        finetune_head_hidden: 4,
    }
}

/// Tone at a class-dependent frequency plus noise; ranging labels grow
/// with the class.
fn records(per_class: usize, classes: usize, seed: u64) -> Vec<SignalRecord> {
    let mut out = Vec::new();
    for c in 0..classes {
        for i in 0..per_class {
            let id = (c * per_class + i) as u64;
            let noise = Tensor::<f32>::randn(&[128], 0.3, &mut stream(seed, &[id])).into_data();
            let freq = 0.05 + 0.12 * c as f32;
            let data = (0..128)
                .map(|t| ((t % 64) as f32 * freq + (t / 64) as f32).sin() + noise[t])
                .collect();
            out.push(SignalRecord {
                id,
                data,
                label: Some(c),
                ranging_error_mm: Some(100.0 * c as f32 + i as f32),
                los: Some(c == 0),
                meta: RecordMeta::default(),
            });
        }
    }
    out
}

fn names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("c{i}")).collect()
}

fn quick(phase: Phase, epochs: usize) -> TrainConfig {
    TrainConfig {
        batch_size: 8,
        epochs,
        lr: 1e-3,
        ..TrainConfig::new(phase)
    }
}

// ---- optimizer -----------------------------------------------------------

fn store1(v: f64) -> ParamStore<f64> {
    let mut s = ParamStore::new();
    s.insert("x", Tensor::scalar(v));
    s
}

#[test]
fn zero_gradients_without_decay_change_nothing() {
    let mut s = store1(1.25);
    let mut opt = AdamW::<f64>::default();
    for _ in 0..5 {
        opt.step(&mut s, &[("x".into(), Tensor::scalar(0.0))], 1e-3, 0.0)
            .unwrap();
    }
    assert_eq!(s.get("x").unwrap().data()[0], 1.25);
}

#[test]
fn zero_gradients_with_decay_only_shrink() {
    let mut s = store1(2.0);
    let mut opt = AdamW::<f64>::default();
    let (lr, wd) = (1e-2, 0.5);
    let mut expect = 2.0;
    for _ in 0..4 {
        opt.step(&mut s, &[("x".into(), Tensor::scalar(0.0))], lr, wd)
            .unwrap();
        expect *= 1.0 - lr * wd;
        assert_eq!(s.get("x").unwrap().data()[0], expect);
    }
}

/// Hand-stepped scalar AdamW.
fn adamw_oracle(x0: f64, grad: impl Fn(f64) -> f64, lr: f64, wd: f64, steps: usize) -> Vec<f64> {
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let (mut x, mut m, mut v) = (x0, 0.0, 0.0);
    let mut trace = Vec::new();
    for t in 1..=steps {
        let g = grad(x);
        x -= lr * wd * x;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let m_hat = m / (1.0 - b1.powi(t as i32));
        let v_hat = v / (1.0 - b2.powi(t as i32));
        x -= lr * m_hat / (v_hat.sqrt() + eps);
        trace.push(x);
    }
    trace
}

#[test]
fn adamw_matches_scalar_oracle_on_a_quadratic() {
    let grad = |x: f64| 2.0 * (x - 3.0);
    let (lr, wd) = (0.02, 0.01);
    let oracle = adamw_oracle(0.0, grad, lr, wd, 100);
    let mut s = store1(0.0);
    let mut opt = AdamW::<f64>::default();
    let mut losses = Vec::new();
    for expected in &oracle {
        let x = s.get("x").unwrap().data()[0];
        opt.step(&mut s, &[("x".into(), Tensor::scalar(grad(x)))], lr, wd)
            .unwrap();
        let x = s.get("x").unwrap().data()[0];
        assert!((x - expected).abs() < 1e-6, "{x} vs {expected}");
        losses.push((x - 3.0).powi(2));
    }
    assert_eq!(opt.steps(), 100);
    assert!(losses.windows(2).skip(5).all(|w| w[1] <= w[0]));
    assert!(losses[99] < 0.25 * losses[0]);
}

#[test]
fn non_finite_gradient_reports_its_step() {
    let mut s = store1(1.0);
    let mut opt = AdamW::<f64>::default();
    opt.step(&mut s, &[("x".into(), Tensor::scalar(1.0))], 1e-3, 0.0)
        .unwrap();
    let before = s.clone();
    let err = opt
        .step(&mut s, &[("x".into(), Tensor::scalar(f64::NAN))], 1e-3, 0.0)
        .unwrap_err();
    assert!(matches!(err, Error::Training { step: 2, .. }), "{err}");
    assert_eq!(s, before);
    assert!(opt
        .step(&mut s, &[("x".into(), Tensor::zeros(&[2]))], 1e-3, 0.0)
        .is_err());
}

// ---- scheduler -------------------------------------------------------------

fn run(losses: &[f64]) -> (PlateauScheduler, Vec<f64>) {
    let mut s = PlateauScheduler::new(1e-3, SchedulerConfig::default());
    let lrs = losses.iter().map(|&l| s.step(l)).collect();
    (s, lrs)
}

#[test]
fn improving_losses_keep_the_rate() {
    let (s, lrs) = run(&[1.0, 0.9, 0.8]);
    assert!(lrs.iter().all(|&lr| lr == 1e-3));
    assert_eq!(s.reductions, 0);
}

#[test]
fn three_flat_epochs_after_the_best_reduce_once() {
    let (_, lrs) = run(&[1.0, 1.0, 1.0, 1.0]);
    assert_eq!(lrs[..3], [1e-3; 3]);
    assert_eq!(lrs[3], 1e-3 * 0.7);
}

#[test]
fn two_windows_compose() {
    let (s, lrs) = run(&[1.0; 7]);
    assert_eq!(s.reductions, 2);
    assert_eq!(lrs[6], 1e-3 * 0.7f64.powi(2));
    assert!((lrs[6] - 0.49e-3).abs() < 1e-18);
}

#[test]
fn tiny_improvements_do_not_reset_patience() {
    let (s, _) = run(&[1.0, 0.99995, 0.99992, 0.99991]);
    assert_eq!(s.reductions, 1);
    let (s, _) = run(&[1.0, 0.99, 0.98, 0.97]);
    assert_eq!(s.reductions, 0);
}

proptest! {
    #[test]
    fn scheduler_rate_is_monotone_and_exact(losses in prop::collection::vec(0.0f64..2.0, 1..60)) {
        let mut s = PlateauScheduler::new(1e-4, SchedulerConfig::default());
        let mut prev = s.lr();
        for &l in &losses {
            let lr = s.step(l);
            prop_assert!(lr <= prev);
            prop_assert_eq!(lr, 1e-4 * 0.7f64.powi(s.reductions as i32));
            prev = lr;
        }
    }
}

// ---- masking ---------------------------------------------------------------

#[test]
fn half_of_thirty_two_patches() {
    let plan = MaskPlan::draw(3, 32, 0.5, &mut stream(1, &[])).unwrap();
    assert!(plan.masked.iter().all(|m| m.len() == 16));
    assert_eq!(masked_count(0.5, 32), 16);
    assert_eq!(masked_count(0.3, 5), 2);
    assert!(MaskPlan::draw(1, 4, 1.0, &mut stream(1, &[])).is_err());
    assert!(MaskPlan::draw(1, 4, -0.1, &mut stream(1, &[])).is_err());
}

#[test]
fn empty_plan_is_identity() {
    let patches = Tensor::<f32>::randn(&[2 * 2 * 8, 4], 1.0, &mut stream(2, &[]));
    let plan = MaskPlan::draw(2, 8, 0.0, &mut stream(2, &[])).unwrap();
    assert!(plan.rows().is_empty());
    assert_eq!(mask_patches(&patches, &plan).unwrap(), patches);
}

#[test]
fn plan_must_fit_the_patches() {
    let patches = Tensor::<f32>::zeros(&[2 * 8, 4]);
    let plan = MaskPlan {
        n_patches: 8,
        masked: vec![vec![8]],
    };
    assert!(mask_patches(&patches, &plan).is_err());
    let plan = MaskPlan {
        n_patches: 8,
        masked: vec![vec![1], vec![2]],
    };
    assert!(mask_patches(&patches, &plan).is_err());
}

proptest! {
    #[test]
    fn zero_mode_masks_exactly_the_planned_rows(
        b in 1usize..4, n in 1usize..20, ratio in 0.0f64..0.99, seed in any::<u64>()
    ) {
        let p = 3;
        let patches = Tensor::<f32>::randn(&[b * 2 * n, p], 1.0, &mut stream(seed, &[1]));
        let original = patches.clone();
        let plan = MaskPlan::draw(b, n, ratio, &mut stream(seed, &[2])).unwrap();
        let out = mask_patches(&patches, &plan).unwrap();
        prop_assert_eq!(&patches, &original);
        for (r, idx) in plan.masked.iter().enumerate() {
            prop_assert_eq!(idx.len(), (ratio * n as f64).round() as usize);
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]) && idx.iter().all(|&k| k < n));
            for c in 0..2 {
                for k in 0..n {
                    let row = (2 * r + c) * n + k;
                    if idx.contains(&k) {
                        prop_assert!(out.row(row).iter().all(|&v| v == 0.0));
                    } else {
                        prop_assert_eq!(out.row(row), patches.row(row));
                    }
                }
            }
        }
        prop_assert_eq!(plan.row_flags().iter().filter(|&&f| f).count(), plan.rows().len());
    }
}

// ---- freezing --------------------------------------------------------------

#[test]
fn finetune_freeze_spec_selects_last_layer_and_head() {
    let cfg = tiny();
    let m = Model::new(cfg, HeadKind::Classification { classes: 3 }, names(3), 0).unwrap();
    let f = FreezeSpec::finetune(&m.params, cfg.layers);
    for name in m.params.names() {
        let expect = name.starts_with("encoder.1.") || name.starts_with("head.");
        assert_eq!(f.is_trainable(name), expect, "{name}");
    }
    assert_eq!(
        FreezeSpec::all(&m.params).trainable_fraction(&m.params),
        1.0
    );
    assert!(f.trainable_fraction(&m.params) < 1.0);
}

// ---- phases ----------------------------------------------------------------

#[test]
fn one_epoch_on_two_batches() {
    let recs = records(8, 2, 1);
    let (train, val) = recs.split_at(12);
    let cfg = TrainConfig {
        batch_size: 8,
        epochs: 1,
        ..TrainConfig::new(Phase::PretrainSupervised)
    };
    let (model, out) = pretrain_supervised(train, val, names(2), tiny(), &cfg).unwrap();
    assert_eq!(out.history.epochs(), 1);
    assert_eq!(out.history.rows.len(), 2);
    assert_eq!(out.steps, 2);
    assert_eq!(out.best_epoch, 1);
    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(&model, dir.path()).unwrap();
    assert_eq!(load_checkpoint(dir.path()).unwrap(), model);

    let lines: Vec<serde_json::Value> = out
        .history
        .to_jsonl()
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines[0]["split"], "train");
    assert_eq!(lines[1]["split"], "val");
    assert_eq!(lines[1]["lr"], 1e-4);
    assert!(lines[1]["accuracy"]
        .as_f64()
        .is_some_and(|a| (0.0..=1.0).contains(&a)));
}

#[test]
fn supervised_pretraining_learns_separable_tones() {
    let recs = records(24, 3, 2);
    let (train, val): (Vec<_>, Vec<_>) = recs.into_iter().partition(|r| r.id % 4 != 0);
    let cfg = TrainConfig {
        target_val_accuracy: Some(0.95),
        ..quick(Phase::PretrainSupervised, 40)
    };
    let (_, out) = pretrain_supervised(&train, &val, names(3), tiny(), &cfg).unwrap();
    let best = out
        .history
        .split("val")
        .filter_map(|r| r.accuracy)
        .fold(0.0, f64::max);
    assert!(best >= 0.95, "best validation accuracy {best}");
}

#[test]
fn training_is_deterministic() {
    let recs = records(6, 2, 3);
    let (train, val) = recs.split_at(9);
    let cfg = quick(Phase::PretrainSupervised, 3);
    let (a, ha) = pretrain_supervised(train, val, names(2), tiny(), &cfg).unwrap();
    let (b, hb) = pretrain_supervised(train, val, names(2), tiny(), &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha.history, hb.history);
    let (c, _) = pretrain_supervised(
        train,
        val,
        names(2),
        tiny(),
        &TrainConfig { seed: 1, ..cfg },
    )
    .unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn best_validation_epoch_is_kept() {
    let recs = records(6, 2, 4);
    let (train, val) = recs.split_at(9);
    let (model, out) = pretrain_supervised(
        train,
        val,
        names(2),
        tiny(),
        &quick(Phase::PretrainSupervised, 6),
    )
    .unwrap();
    let val_losses: Vec<f64> = out.history.split("val").map(|r| r.loss).collect();
    let argmin = val_losses
        .iter()
        .enumerate()
        .fold(0, |b, (i, &l)| if l < val_losses[b] { i } else { b });
    assert_eq!(out.best_epoch, argmin + 1);
    assert_eq!(model.provenance.best_epoch, Some(out.best_epoch));
}

#[test]
fn label_outside_the_label_space_is_rejected() {
    let recs = records(4, 3, 5);
    let err = pretrain_supervised(
        &recs,
        &recs,
        names(2),
        tiny(),
        &quick(Phase::PretrainSupervised, 1),
    )
    .unwrap_err();
    assert!(
        matches!(
            err,
            Error::Label {
                label: 2,
                classes: 2
            }
        ),
        "{err}"
    );
    let err = pretrain_supervised(
        &recs,
        &recs,
        names(3),
        tiny(),
        &quick(Phase::PretrainSsl, 1),
    )
    .unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn non_finite_input_stops_training() {
    let mut recs = records(4, 2, 6);
    recs[1].data[5] = f32::NAN;
    let err = pretrain_supervised(
        &recs,
        &recs,
        names(2),
        tiny(),
        &quick(Phase::PretrainSupervised, 1),
    )
    .unwrap_err();
    assert!(matches!(err, Error::Training { step: 1, .. }), "{err}");
}

#[test]
fn ssl_learns_an_all_zero_corpus() {
    let mut recs = records(4, 2, 7);
    for r in &mut recs {
        r.data.iter_mut().for_each(|v| *v = 0.0);
    }
    let (model, out) = pretrain_ssl(&recs, &recs, tiny(), &quick(Phase::PretrainSsl, 10)).unwrap();
    assert_eq!(model.head, HeadKind::Reconstruction);
    let last = out.history.split("val").last().unwrap().loss;
    assert!(last < 1e-3, "{last}");
}

#[test]
fn ssl_reduces_reconstruction_loss() {
    let recs = records(16, 2, 8);
    let (train, val) = recs.split_at(24);
    for mode in [MaskMode::LearnedToken, MaskMode::Zero] {
        for masked_only_loss in [false, true] {
            let cfg = TrainConfig {
                mask_mode: mode,
                masked_only_loss,
                lr: 1e-2,
                ..quick(Phase::PretrainSsl, 12)
            };
            let (_, out) = pretrain_ssl(train, val, tiny(), &cfg).unwrap();
            let losses: Vec<f64> = out.history.split("val").map(|r| r.loss).collect();
            let best = losses.iter().cloned().fold(f64::MAX, f64::min);
            assert!(
                best < 0.8 * losses[0],
                "{mode:?} {masked_only_loss}: {losses:?}"
            );
        }
    }
}

fn pretrained(seed: u64) -> (Model, Vec<SignalRecord>) {
    let recs = records(8, 3, seed);
    let (model, _) = pretrain_supervised(
        &recs[..18],
        &recs[18..],
        names(3),
        tiny(),
        &quick(Phase::PretrainSupervised, 1),
    )
    .unwrap();
    (model, recs)
}

#[test]
fn finetuning_keeps_frozen_bytes() {
    let cfg = tiny();
    let (pre, recs) = pretrained(9);
    let (train, val) = recs.split_at(18);
    let frozen = |n: &str| !n.starts_with("encoder.1.") && !n.starts_with("head.");
    let last = |n: &str| n.starts_with("encoder.1.");
    let task = FinetuneTask::Classification { classes: names(4) };
    let (ft, out) = finetune(&pre, train, val, task, &quick(Phase::FinetuneCls, 10)).unwrap();
    assert_eq!(out.history.epochs(), 10);
    assert_eq!(ft.params.digest(frozen), pre.params.digest(frozen));
    assert_ne!(ft.params.digest(last), pre.params.digest(last));
    assert_eq!(ft.head, HeadKind::Classification { classes: 4 });
    assert_eq!(ft.classes, names(4));
    assert_eq!(
        ft.params.get("head.cls.b2").unwrap().len(),
        cfg.finetune_head_hidden
    );
    assert_eq!(
        ft.params.get("head.cls.w1").unwrap().shape(),
        &[cfg.finetune_head_hidden, 4]
    );
    assert_eq!(
        ft.params.get("head.cls.w2").unwrap().shape(),
        &[cfg.feature_width(), cfg.finetune_head_hidden]
    );
}

#[test]
fn one_finetune_step_touches_only_the_trainable_set() {
    let (pre, recs) = pretrained(10);
    let cfg = TrainConfig {
        batch_size: 64,
        ..quick(Phase::FinetuneCls, 1)
    };
    let (ft, out) = finetune(
        &pre,
        &recs,
        &recs,
        FinetuneTask::Classification { classes: names(3) },
        &cfg,
    )
    .unwrap();
    assert_eq!(out.steps, 1);
    for (name, t) in ft.params.iter() {
        if name.starts_with("head.") {
            continue;
        }
        let changed = pre.params.get(name).unwrap() != t;
        assert_eq!(changed, name.starts_with("encoder.1."), "{name}");
    }
}

#[test]
fn regression_finetuning_predicts_in_millimetres() {
    let (pre, recs) = pretrained(11);
    let (train, val): (Vec<_>, Vec<_>) = recs.into_iter().partition(|r| r.id % 4 != 0);
    let (ft, out) = finetune(
        &pre,
        &train,
        &val,
        FinetuneTask::Regression,
        &TrainConfig {
            lr: 1e-2,
            ..quick(Phase::FinetuneReg, 30)
        },
    )
    .unwrap();
    assert_eq!(ft.head, HeadKind::Regression);
    let norm = ft.target_norm.unwrap();
    let labels: Vec<f64> = train
        .iter()
        .map(|r| r.ranging_error_mm.unwrap() as f64)
        .collect();
    assert!((norm.mean - labels.iter().sum::<f64>() / labels.len() as f64).abs() < 1e-9);
    let maes: Vec<f64> = out
        .history
        .split("val")
        .map(|r| r.mae_mm.unwrap())
        .collect();
    let baseline = val
        .iter()
        .map(|r| (r.ranging_error_mm.unwrap() as f64 - norm.mean).abs())
        .sum::<f64>()
        / val.len() as f64;
    assert!(
        maes.iter().cloned().fold(f64::MAX, f64::min) < 0.5 * baseline,
        "{maes:?} vs {baseline}"
    );
}

#[test]
fn finetune_rejects_mismatched_inputs() {
    let (pre, mut recs) = pretrained(12);
    let cls = || FinetuneTask::Classification { classes: names(3) };
    assert!(matches!(
        finetune(&pre, &recs, &recs, cls(), &quick(Phase::FinetuneReg, 1)),
        Err(Error::Config(_))
    ));
    let short: Vec<SignalRecord> = recs
        .iter()
        .map(|r| SignalRecord {
            data: r.data[..64].to_vec(),
            ..r.clone()
        })
        .collect();
    assert!(matches!(
        finetune(&pre, &short, &short, cls(), &quick(Phase::FinetuneCls, 1)),
        Err(Error::Config(_))
    ));
    recs.iter_mut().for_each(|r| r.ranging_error_mm = None);
    let err = finetune(
        &pre,
        &recs,
        &recs,
        FinetuneTask::Regression,
        &quick(Phase::FinetuneReg, 1),
    )
    .unwrap_err();
    assert!(matches!(err, Error::LabelFamily { .. }), "{err}");
}

#[test]
fn config_validation() {
    assert!(TrainConfig::new(Phase::PretrainSsl).validate().is_ok());
    let base = TrainConfig::new(Phase::FinetuneCls);
    assert_eq!(
        (base.lr, base.weight_decay, base.batch_size),
        (1e-5, 1e-5, 64)
    );
    assert_eq!(TrainConfig::new(Phase::PretrainSupervised).lr, 1e-4);
    assert_eq!(base.mask_mode, MaskMode::LearnedToken);
    for bad in [
        TrainConfig {
            mask_ratio: 0.0,
            ..base.clone()
        },
        TrainConfig {
            mask_ratio: 1.0,
            ..base.clone()
        },
        TrainConfig {
            batch_size: 0,
            ..base.clone()
        },
        TrainConfig {
            lr: -1.0,
            ..base.clone()
        },
        TrainConfig {
            epochs: 0,
            ..base.clone()
        },
    ] {
        assert!(bad.validate().is_err(), "{bad:?}");
    }
}
