//! Train/val/test record sets for each workflow phase.

use std::collections::HashSet;

use super::container::Corpus;
use super::record::{LabelFamily, SignalRecord, LOS_CLASSES};
use super::split::{
    make_finetune_split, stratified_split, FinetunePlan, SplitAssignment, DEFAULT_RATIOS,
};
use crate::error::{Error, Result};

/// Records of one phase. Classification labels index `classes`.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskSplit {
    pub classes: Vec<String>,
    pub train: Vec<SignalRecord>,
    pub val: Vec<SignalRecord>,
    pub test: Vec<SignalRecord>,
    pub split: SplitAssignment,
}

impl TaskSplit {
    fn from_assignment(
        corpus: &Corpus,
        classes: Vec<String>,
        split: SplitAssignment,
    ) -> Result<TaskSplit> {
        Ok(TaskSplit {
            classes,
            train: corpus.select(&split.train)?,
            val: corpus.select(&split.val)?,
            test: corpus.select(&split.test)?,
            split,
        })
    }

    /// Relabels classification records into a reduced label space.
    fn relabel(mut self, from: &[String]) -> Result<TaskSplit> {
        let map: Vec<Option<usize>> = from
            .iter()
            .map(|c| self.classes.iter().position(|k| k == c))
            .collect();
        for r in self
            .train
            .iter_mut()
            .chain(&mut self.val)
            .chain(&mut self.test)
        {
            let old = r.label.ok_or_else(|| Error::Label {
                label: usize::MAX,
                classes: from.len(),
            })?;
            r.label = Some(map.get(old).copied().flatten().ok_or(Error::Label {
                label: old,
                classes: from.len(),
            })?);
        }
        Ok(self)
    }
}

fn corpus_split(corpus: &Corpus) -> Result<SplitAssignment> {
    match &corpus.splits {
        Some(s) => Ok(s.clone()),
        None => stratified_split(&corpus.records, DEFAULT_RATIOS, 0),
    }
}

fn keep(ids: &[u64], allowed: &HashSet<u64>) -> Vec<u64> {
    ids.iter()
        .copied()
        .filter(|id| allowed.contains(id))
        .collect()
}

/// Pre-training view: the corpus split with one class optionally removed
/// from every part. Labels are renumbered over the remaining classes.
pub fn pretrain_view(corpus: &Corpus, exclude: Option<&str>) -> Result<TaskSplit> {
    let split = corpus_split(corpus)?;
    let Some(name) = exclude else {
        return TaskSplit::from_assignment(corpus, corpus.classes.clone(), split);
    };
    if corpus.family != LabelFamily::Classification {
        return Err(Error::LabelFamily {
            expected: LabelFamily::Classification.to_string(),
            found: corpus.family.to_string(),
        });
    }
    let excluded = corpus.class_index(name)?;
    let allowed: HashSet<u64> = corpus
        .records
        .iter()
        .filter(|r| r.label != Some(excluded))
        .map(|r| r.id)
        .collect();
    let split = SplitAssignment {
        train: keep(&split.train, &allowed),
        val: keep(&split.val, &allowed),
        test: keep(&split.test, &allowed),
        ..split
    };
    let classes = corpus
        .classes
        .iter()
        .filter(|c| *c != name)
        .cloned()
        .collect();
    TaskSplit::from_assignment(corpus, classes, split)?.relabel(&corpus.classes)
}

/// Fine-tuning view over the full label space: the pool is the pre-training
/// test records plus every record of the excluded class, re-split by `plan`.
pub fn finetune_view(
    corpus: &Corpus,
    pretrain_test: &[u64],
    excluded: Option<&str>,
    plan: &FinetunePlan,
) -> Result<TaskSplit> {
    let test = corpus.select(pretrain_test)?;
    let heldout = match excluded {
        Some(name) => {
            let idx = corpus.class_index(name)?;
            corpus
                .records
                .iter()
                .filter(|r| r.label == Some(idx))
                .cloned()
                .collect()
        }
        None => Vec::new(),
    };
    let split = make_finetune_split(&test, &heldout, plan)?;
    TaskSplit::from_assignment(corpus, corpus.classes.clone(), split)
}

/// Label space of a corpus under a task: its class names, or LOS/NLOS for
/// ranging corpora.
pub fn class_names(corpus: &Corpus) -> Vec<String> {
    match corpus.family {
        LabelFamily::Classification => corpus.classes.clone(),
        LabelFamily::Ranging => LOS_CLASSES.iter().map(|s| s.to_string()).collect(),
    }
}
