use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::record::SignalRecord;
use crate::error::{Error, Result};
use crate::numerics::rng::{stream, tag};

pub const DEFAULT_RATIOS: [f64; 3] = [0.7, 0.15, 0.15];

/// Train/val/test partition of record ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub train: Vec<u64>,
    pub val: Vec<u64>,
    pub test: Vec<u64>,
}

impl SplitAssignment {
    pub fn all_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.train
            .iter()
            .chain(&self.val)
            .chain(&self.test)
            .copied()
    }

    pub fn is_disjoint_from(&self, ids: &HashSet<u64>) -> bool {
        self.all_ids().all(|id| !ids.contains(&id))
    }

    /// True when the three parts share no id.
    pub fn is_partition(&self) -> bool {
        let mut seen = HashSet::new();
        self.all_ids().all(|id| seen.insert(id))
    }
}

fn check_ratios(ratios: [f64; 3]) -> Result<()> {
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r))
        || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::Config(format!(
            "split ratios {ratios:?} must be nonnegative and sum to 1"
        )));
    }
    Ok(())
}

/// Groups record ids by stratum, shuffled per stratum with a stream derived
/// from (seed, purpose, stratum).
fn shuffled_strata(
    records: &[&SignalRecord],
    seed: u64,
    purpose: &str,
) -> BTreeMap<usize, Vec<u64>> {
    let mut strata: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for r in records {
        strata.entry(r.stratum()).or_default().push(r.id);
    }
    for (&s, ids) in strata.iter_mut() {
        ids.sort_unstable();
        ids.shuffle(&mut stream(seed, &[tag(purpose), s as u64]));
    }
    strata
}

/// Splits `n` items as `round(r_train·n)`, `round(r_val·n)`, remainder.
fn allocate(n: usize, ratios: [f64; 3]) -> (usize, usize) {
    let train = ((ratios[0] * n as f64).round() as usize).min(n);
    let val = ((ratios[1] * n as f64).round() as usize).min(n - train);
    (train, val)
}

/// Stratified train/val/test split.
pub fn stratified_split(
    records: &[SignalRecord],
    ratios: [f64; 3],
    seed: u64,
) -> Result<SplitAssignment> {
    check_ratios(ratios)?;
    let refs: Vec<&SignalRecord> = records.iter().collect();
    let mut out = SplitAssignment {
        seed,
        ratios,
        train: vec![],
        val: vec![],
        test: vec![],
    };
    for ids in shuffled_strata(&refs, seed, "split").into_values() {
        let (nt, nv) = allocate(ids.len(), ratios);
        out.train.extend_from_slice(&ids[..nt]);
        out.val.extend_from_slice(&ids[nt..nt + nv]);
        out.test.extend_from_slice(&ids[nt + nv..]);
    }
    Ok(out)
}

/// Partitions `records` into those not of class `class` and those of it.
pub fn exclude_class(
    records: Vec<SignalRecord>,
    classes: &[String],
    class: &str,
) -> Result<(Vec<SignalRecord>, Vec<SignalRecord>)> {
    let idx = classes
        .iter()
        .position(|c| c == class)
        .ok_or_else(|| Error::UnknownClass(class.to_string()))?;
    Ok(records.into_iter().partition(|r| r.label != Some(idx)))
}

/// Options for re-splitting the fine-tuning pool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinetunePlan {
    pub ratios: [f64; 3],
    /// Exact number of fine-tune training records per class; the rest of
    /// each class is divided between val and test in the val:test ratio.
    pub samples_per_class: Option<usize>,
    /// Subsample every class to at most this many records before splitting.
    pub max_per_class: Option<usize>,
    pub seed: u64,
}

impl Default for FinetunePlan {
    fn default() -> Self {
        FinetunePlan {
            ratios: DEFAULT_RATIOS,
            samples_per_class: None,
            max_per_class: None,
            seed: 0,
        }
    }
}

/// Re-splits the fine-tuning pool (pretrain test records plus held-out
/// records) into new train/val/test sets, stratified by class.
pub fn make_finetune_split(
    pretrain_test: &[SignalRecord],
    heldout: &[SignalRecord],
    plan: &FinetunePlan,
) -> Result<SplitAssignment> {
    check_ratios(plan.ratios)?;
    let pool: Vec<&SignalRecord> = pretrain_test.iter().chain(heldout).collect();
    let mut out = SplitAssignment {
        seed: plan.seed,
        ratios: plan.ratios,
        train: vec![],
        val: vec![],
        test: vec![],
    };
    for (stratum, mut ids) in shuffled_strata(&pool, plan.seed, "finetune") {
        if let Some(cap) = plan.max_per_class {
            ids.truncate(cap);
        }
        let n = ids.len();
        let (nt, nv) = match plan.samples_per_class {
            Some(s) if s > n => {
                return Err(Error::Insufficient(format!(
                    "{s} fine-tune samples requested for class {stratum}, only {n} available"
                )))
            }
            Some(s) => {
                let rest = n - s;
                let holdout = plan.ratios[1] + plan.ratios[2];
                let frac = if holdout > 0.0 {
                    plan.ratios[1] / holdout
                } else {
                    0.0
                };
                (s, ((frac * rest as f64).round() as usize).min(rest))
            }
            None => allocate(n, plan.ratios),
        };
        out.train.extend_from_slice(&ids[..nt]);
        out.val.extend_from_slice(&ids[nt..nt + nv]);
        out.test.extend_from_slice(&ids[nt + nv..]);
    }
    Ok(out)
}

/// Index batches over `n` records. With `shuffle`, the order is a
/// permutation drawn from `seed`; the final batch may be partial.
pub fn batch_iter(
    n: usize,
    batch_size: usize,
    shuffle: bool,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        order.shuffle(&mut stream(seed, &[tag("batches")]));
    }
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}
