use proptest::prelude::*;
use wavefm::dataset::{RecordMeta, SignalRecord};
use wavefm::eval::*;
use wavefm::heads::HeadKind;
use wavefm::model::{encode_batch, Bound};
use wavefm::model::{Model, ModelConfig, TargetNorm};
use wavefm::numerics::rng::stream;
use wavefm::numerics::{Tape, Tensor};
use wavefm::patch::segment_batch;
use wavefm::training::{Phase, TrainConfig};
use wavefm::Error;

fn names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("c{i}")).collect()
}

fn record(id: u64, length: usize, label: Option<usize>, mm: Option<f32>) -> SignalRecord {
    let data = Tensor::<f32>::randn(&[2 * length], 1.0, &mut stream(id, &[])).into_data();
    SignalRecord {
        id,
        data,
        label,
        ranging_error_mm: mm,
        los: None,
        meta: RecordMeta::default(),
    }
}

#[test]
fn perfect_predictions() {
    let truth = [0, 1, 2, 2, 1, 0];
    let r = classification_report(&truth, &truth, &names(3)).unwrap();
    assert_eq!(r.accuracy, Some(1.0));
    for (i, row) in r.confusion.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            assert_eq!(v == 0, i != j);
        }
    }
    assert_eq!(r.precision, vec![1.0; 3]);
    assert_eq!(r.recall, vec![1.0; 3]);
}

#[test]
fn constant_predictor_on_balanced_classes() {
    let truth: Vec<usize> = (0..40).map(|i| i % 4).collect();
    let r = classification_report(&[2; 40], &truth, &names(4)).unwrap();
    assert_eq!(r.accuracy, Some(0.25));
    assert_eq!(r.recall, vec![0.0, 0.0, 1.0, 0.0]);
    assert_eq!(r.precision[2], 0.25);
}

#[test]
fn regression_arithmetic() {
    let r = regression_report(&[100.0, 200.0], &[100.0, 300.0]).unwrap();
    assert_eq!(r.mae_mm, Some(50.0));
    assert_eq!(r.mae_before_mm, Some(200.0));
    let labels = [12.0, -40.0, 7.5];
    let zero = regression_report(&[0.0; 3], &labels).unwrap();
    assert_eq!(zero.mae_mm, zero.mae_before_mm);
    assert_eq!(
        regression_report(&labels, &labels).unwrap().mae_mm,
        Some(0.0)
    );
}

#[test]
fn empty_and_mismatched_inputs() {
    assert!(matches!(
        classification_report(&[], &[], &names(2)),
        Err(Error::Insufficient(_))
    ));
    assert!(matches!(
        regression_report(&[], &[]),
        Err(Error::Insufficient(_))
    ));
    assert!(confusion_matrix(&[0, 1], &[0], 2).is_err());
    assert!(matches!(
        confusion_matrix(&[3], &[0], 2),
        Err(Error::Label {
            label: 3,
            classes: 2
        })
    ));
}

proptest! {
    #[test]
    fn confusion_agrees_with_direct_counts(pairs in prop::collection::vec((0usize..5, 0usize..5), 1..200)) {
        let (pred, truth): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let r = classification_report(&pred, &truth, &names(5)).unwrap();
        let correct = pred.iter().zip(&truth).filter(|(p, t)| p == t).count();
        prop_assert_eq!(r.accuracy.unwrap(), correct as f64 / truth.len() as f64);
        for (c, row) in r.confusion.iter().enumerate() {
            prop_assert_eq!(row.iter().sum::<usize>(), truth.iter().filter(|&&t| t == c).count());
        }
        prop_assert_eq!(r.confusion.iter().flatten().sum::<usize>(), truth.len());
    }
}

fn tiny() -> ModelConfig {
    ModelConfig {
        length: 32,
        patch_len: 8,
        stride: 8,
        d_model: 8,
        heads: 2,
        layers: 1,
        ff_dim: 16,
        dropout: 0.1,
        attn_dropout: 0.1,
        residual_dropout: 0.1,
        head_hidden: 4,
        finetune_head_hidden: 3,
    }
}

#[test]
fn model_evaluation_is_reproducible() {
    let recs: Vec<SignalRecord> = (0..9)
        .map(|i| record(i, 32, Some(i as usize % 3), None))
        .collect();
    let m = Model::new(tiny(), HeadKind::Classification { classes: 3 }, names(3), 2).unwrap();
    let a = evaluate_classification(&m, &recs, 4).unwrap();
    let b = evaluate_classification(&m, &recs, 4).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert_eq!(a.samples, 9);
    assert_eq!(a.param_count, Some(m.params.scalar_count(|_| true)));
    assert!(a.runtime_s_per_epoch.is_none());
    assert!(evaluate_classification(&m, &[], 4).is_err());
    assert!(evaluate_regression(&m, &recs, 4).is_err());
}

#[test]
fn regression_evaluation_uses_millimetres() {
    let recs: Vec<SignalRecord> = (0..4)
        .map(|i| record(i, 32, None, Some(50.0 * i as f32)))
        .collect();
    let mut m = Model::new(tiny(), HeadKind::Regression, vec![], 2).unwrap();
    m.target_norm = Some(TargetNorm {
        mean: 75.0,
        std: 1e-9,
    });
    let r = evaluate_regression(&m, &recs, 3).unwrap();
    // A near-zero scale pins every prediction to the mean.
    assert!((r.mae_mm.unwrap() - 50.0).abs() < 1e-3);
    assert_eq!(r.mae_before_mm, Some(75.0));
    let unlabeled: Vec<SignalRecord> = (0..2).map(|i| record(i, 32, Some(0), None)).collect();
    assert!(matches!(
        evaluate_regression(&m, &unlabeled, 3),
        Err(Error::LabelFamily { .. })
    ));
}

#[test]
fn tables_render() {
    let r = classification_report(&[0, 1, 1], &[0, 1, 0], &names(2)).unwrap();
    let t = r.to_table();
    assert!(t.contains("accuracy  0.6667"));
    assert!(t
        .lines()
        .any(|l| l.split_whitespace().collect::<Vec<_>>() == ["1", "1"]));
}

// ---- benchmark -------------------------------------------------------------

#[test]
fn attention_cost_formula() {
    assert_eq!(
        attention_macs(32, 128, 8),
        8 * 2 * 32 * 32 * 16 + 4 * 32 * 128 * 128
    );
    let cfg = sweep_config(&ModelConfig::default(), 128).unwrap();
    assert_eq!(cfg.n_patches(), 32);
    let score = |n: usize| attention_macs(n, 64, 8) - 4 * (n as u64) * 64 * 64;
    assert_eq!(score(64), 4 * score(32));
    assert!(matches!(
        sweep_config(&ModelConfig::default(), 100),
        Err(Error::Config(_))
    ));
}

#[test]
fn sweep_costs_fall_strictly_with_patch_size() {
    let base = ModelConfig::reduced();
    let costs: Vec<u64> = DEFAULT_PATCH_SIZES
        .iter()
        .map(|&p| {
            let c = sweep_config(&base, p).unwrap();
            attention_macs(c.n_patches(), c.d_model, c.heads)
        })
        .collect();
    assert!(costs.windows(2).all(|w| w[0] > w[1]), "{costs:?}");
}

/// The tape's counted score work matches the analytic term.
#[test]
fn counted_attention_work_matches_formula() {
    for p in [4, 8, 16] {
        let cfg = sweep_config(&tiny(), p).unwrap();
        let m = Model::new(cfg, HeadKind::Classification { classes: 2 }, names(2), 0).unwrap();
        let recs: Vec<SignalRecord> = (0..3).map(|i| record(i, 32, Some(0), None)).collect();
        let refs: Vec<&SignalRecord> = recs.iter().collect();
        let mut tape = Tape::new();
        let bound = Bound::new(&mut tape, &m.params, |_| false);
        let patches = segment_batch::<f32>(&refs, &cfg.patch()).unwrap();
        encode_batch(&mut tape, &bound, &cfg, patches, None, &mut None).unwrap();
        let n = cfg.n_patches() as u64;
        let projections = 4 * n * (cfg.d_model as u64).pow(2);
        let per_seq = attention_macs(cfg.n_patches(), cfg.d_model, cfg.heads) - projections;
        assert_eq!(
            tape.attention_score_macs(),
            per_seq * 2 * 3 * cfg.layers as u64
        );
    }
}

#[test]
fn short_benchmark_produces_one_row_per_patch_size() {
    let recs: Vec<SignalRecord> = (0..12)
        .map(|i| record(i, 32, Some(i as usize % 2), None))
        .collect();
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: 4,
        ..TrainConfig::new(Phase::PretrainSupervised)
    };
    let rows = complexity_benchmark(&recs, &recs, &names(2), &tiny(), &[4, 8, 16], &cfg).unwrap();
    assert_eq!(
        rows.iter().map(|r| r.patch_len).collect::<Vec<_>>(),
        [4, 8, 16]
    );
    assert_eq!(
        rows.iter().map(|r| r.n_patches).collect::<Vec<_>>(),
        [8, 4, 2]
    );
    assert!(rows
        .windows(2)
        .all(|w| w[0].activation_scalars_peak > w[1].activation_scalars_peak));
    assert!(rows
        .iter()
        .all(|r| (0.0..=1.0).contains(&r.accuracy) && r.seconds_per_epoch > 0.0));
    let again = complexity_benchmark(&recs, &recs, &names(2), &tiny(), &[4, 8, 16], &cfg).unwrap();
    for (a, b) in rows.iter().zip(&again) {
        assert_eq!(
            (a.accuracy, a.activation_scalars_peak),
            (b.accuracy, b.activation_scalars_peak)
        );
    }
    assert_eq!(bench_table(&rows).lines().count(), 4);
    assert!(complexity_benchmark(&recs, &recs, &names(2), &tiny(), &[5], &cfg).is_err());
}

#[test]
fn svg_chart_is_well_formed() {
    let s = line_chart(
        "accuracy <vs> samples",
        "samples per class",
        "accuracy",
        &[
            Series {
                name: "ssl".into(),
                points: vec![(10.0, 0.5), (50.0, 0.8), (100.0, 0.9)],
            },
            Series {
                name: "scratch".into(),
                points: vec![(10.0, 0.3), (50.0, 0.6)],
            },
        ],
    );
    assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
    assert_eq!(s.matches("<polyline").count(), 2);
    assert_eq!(s.matches("<circle").count(), 5);
    assert!(s.contains("&lt;vs&gt;"));
    assert!(line_chart("empty", "x", "y", &[]).contains("</svg>"));
}
