use std::collections::HashSet;
use std::fs;

use proptest::prelude::*;
use wavefm::dataset::*;
use wavefm::Error;

fn record(id: u64, label: usize, length: usize) -> SignalRecord {
    let data = (0..2 * length)
        .map(|i| ((id as f32) * 0.37 + i as f32 * 0.011).sin())
        .collect();
    SignalRecord {
        id,
        data,
        label: Some(label),
        ranging_error_mm: None,
        los: None,
        meta: RecordMeta {
            source: format!("c{label}"),
            seed: 9,
            snr_db: Some(3.5),
        },
    }
}

fn corpus(per_class: usize, classes: usize, length: usize) -> Corpus {
    let records = (0..per_class * classes)
        .map(|i| record(i as u64, i % classes, length))
        .collect();
    Corpus {
        length,
        family: LabelFamily::Classification,
        classes: (0..classes).map(|c| format!("c{c}")).collect(),
        records,
        splits: None,
    }
}

#[test]
fn container_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = corpus(25, 4, 64);
    c.records[3].data[5] = f32::from_bits(0x3F80_0001);
    c.splits = Some(stratified_split(&c.records, DEFAULT_RATIOS, 1).unwrap());
    let summary = write_container(&c, dir.path()).unwrap();
    assert_eq!(summary.sample_count, 100);
    assert_eq!(summary.class_counts, vec![25; 4]);
    let back = read_container(dir.path()).unwrap();
    assert_eq!(back, c);
    for (a, b) in back.records.iter().zip(&c.records) {
        assert!(a
            .data
            .iter()
            .zip(&b.data)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn ranging_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = corpus(3, 2, 8);
    c.family = LabelFamily::Ranging;
    for (i, r) in c.records.iter_mut().enumerate() {
        r.label = None;
        r.los = Some(i % 2 == 0);
        r.ranging_error_mm = Some(i as f32 * 12.5);
    }
    write_container(&c, dir.path()).unwrap();
    assert_eq!(read_container(dir.path()).unwrap(), c);
}

#[test]
fn shards_split_large_corpora() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(300, 2, 4);
    let summary = write_container(&c, dir.path()).unwrap();
    assert_eq!(summary.shards, 3);
    assert_eq!(read_container(dir.path()).unwrap().records.len(), 600);
}

#[test]
fn truncated_shard_is_an_integrity_error() {
    let dir = tempfile::tempdir().unwrap();
    write_container(&corpus(5, 1, 16), dir.path()).unwrap();
    let shard = dir.path().join("shard_0000.bin");
    let bytes = fs::read(&shard).unwrap();
    fs::write(&shard, &bytes[..bytes.len() * 4 / 5]).unwrap();
    assert!(matches!(
        read_container(dir.path()),
        Err(Error::Integrity(_))
    ));
}

#[test]
fn bad_magic_or_version_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    write_container(&corpus(2, 2, 4), dir.path()).unwrap();
    let path = dir.path().join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, text.replace("\"version\": 1", "\"version\": 99")).unwrap();
    assert!(matches!(read_container(dir.path()), Err(Error::Format(_))));
    fs::write(&path, text.replace(FORMAT_NAME, "something-else")).unwrap();
    assert!(matches!(read_container(dir.path()), Err(Error::Format(_))));
}

#[test]
fn empty_corpus_cannot_be_written() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = corpus(1, 1, 4);
    c.records.clear();
    assert!(write_container(&c, dir.path()).is_err());
}

#[test]
fn mixed_label_families_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = corpus(2, 2, 4);
    c.records[1].ranging_error_mm = Some(1.0);
    assert!(matches!(
        write_container(&c, dir.path()),
        Err(Error::Format(_))
    ));
}

#[test]
fn exclude_class_partitions() {
    let c = corpus(10, 8, 4);
    let (keep, held) = exclude_class(c.records.clone(), &c.classes, "c5").unwrap();
    assert_eq!(held.len(), 10);
    assert!(held.iter().all(|r| r.label == Some(5)));
    let remaining: HashSet<_> = keep.iter().map(|r| r.label.unwrap()).collect();
    assert_eq!(remaining.len(), 7);
    let mut union: Vec<u64> = keep.iter().chain(&held).map(|r| r.id).collect();
    union.sort_unstable();
    assert_eq!(union, (0..80).collect::<Vec<_>>());
    assert!(matches!(
        exclude_class(c.records, &c.classes, "nope"),
        Err(Error::UnknownClass(_))
    ));
}

#[test]
fn stratified_split_sizes() {
    let c = corpus(100, 10, 2);
    let s = stratified_split(&c.records, DEFAULT_RATIOS, 3).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (700, 150, 150));
    assert!(s.is_partition());
    assert_eq!(s.all_ids().count(), 1000);
}

#[test]
fn finetune_split_counts_and_disjointness() {
    let c = corpus(400, 8, 2);
    let (pre, held) = exclude_class(c.records.clone(), &c.classes, "c7").unwrap();
    let pre_split = stratified_split(&pre, [0.2, 0.05, 0.75], 1).unwrap();
    let pre_test = c.select(&pre_split.test).unwrap();
    let plan = FinetunePlan {
        samples_per_class: Some(300),
        ..FinetunePlan::default()
    };
    let ft = make_finetune_split(&pre_test, &held, &plan).unwrap();
    assert_eq!(ft.train.len(), 2400);
    assert!(ft.is_partition());
    let pretrain_fit: HashSet<u64> = pre_split
        .train
        .iter()
        .chain(&pre_split.val)
        .copied()
        .collect();
    assert!(ft.is_disjoint_from(&pretrain_fit));
    let too_many = FinetunePlan {
        samples_per_class: Some(301),
        ..FinetunePlan::default()
    };
    assert!(matches!(
        make_finetune_split(&pre_test, &held, &too_many),
        Err(Error::Insufficient(_))
    ));
}

#[test]
fn finetune_split_cap_balances_classes() {
    let c = corpus(50, 3, 2);
    let plan = FinetunePlan {
        max_per_class: Some(20),
        ..FinetunePlan::default()
    };
    let ft = make_finetune_split(&c.records, &[], &plan).unwrap();
    assert_eq!(ft.all_ids().count(), 60);
    assert_eq!(ft.train.len(), 42);
}

#[test]
fn batches() {
    let b = batch_iter(130, 64, false, 0).unwrap();
    assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![64, 64, 2]);
    assert_eq!(b.concat(), (0..130).collect::<Vec<_>>());
    let s1 = batch_iter(130, 64, true, 5).unwrap();
    assert_eq!(s1, batch_iter(130, 64, true, 5).unwrap());
    assert_ne!(s1, b);
    let mut all = s1.concat();
    all.sort_unstable();
    assert_eq!(all, (0..130).collect::<Vec<_>>());
    assert!(batch_iter(3, 0, false, 0).is_err());
}

proptest! {
    #[test]
    fn stratification_within_one_record(counts in prop::collection::vec(1usize..60, 1..6), seed in 0u64..1000) {
        let mut records = Vec::new();
        for (class, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                records.push(record(records.len() as u64, class, 1));
            }
        }
        let s = stratified_split(&records, DEFAULT_RATIOS, seed).unwrap();
        prop_assert!(s.is_partition());
        prop_assert_eq!(s.all_ids().count(), records.len());
        let label = |id: u64| records[id as usize].label.unwrap();
        for (class, &n) in counts.iter().enumerate() {
            for (part, ratio) in [(&s.train, 0.7), (&s.val, 0.15), (&s.test, 0.15)] {
                let got = part.iter().filter(|&&id| label(id) == class).count() as f64;
                prop_assert!((got - ratio * n as f64).abs() <= 1.0 + 1e-9, "class {} n {} got {} ratio {}", class, n, got, ratio);
            }
        }
    }

    #[test]
    fn finetune_split_never_overlaps_pretrain(seed in 0u64..500, spc in prop::option::of(0usize..=3)) {
        let c = corpus(20, 4, 1);
        let (pre, held) = exclude_class(c.records.clone(), &c.classes, "c0").unwrap();
        let pre_split = stratified_split(&pre, DEFAULT_RATIOS, seed).unwrap();
        let pre_test = c.select(&pre_split.test).unwrap();
        let plan = FinetunePlan { samples_per_class: spc, seed, ..FinetunePlan::default() };
        let ft = make_finetune_split(&pre_test, &held, &plan).unwrap();
        let fit: HashSet<u64> = pre_split.train.iter().chain(&pre_split.val).copied().collect();
        prop_assert!(ft.is_disjoint_from(&fit));
        prop_assert!(ft.is_partition());
    }
}
