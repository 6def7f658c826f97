use std::collections::BTreeSet;

use crate::model::ParamStore;
use crate::numerics::Real;

/// Names of the parameters an optimizer may change.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreezeSpec {
    trainable: BTreeSet<String>,
}

impl FreezeSpec {
    pub fn all<T: Real>(store: &ParamStore<T>) -> Self {
        FreezeSpec {
            trainable: store.names().map(String::from).collect(),
        }
    }

    /// Fine-tuning: the last encoder layer and the head.
    pub fn finetune<T: Real>(store: &ParamStore<T>, layers: usize) -> Self {
        let last = layers.checked_sub(1).map(|l| format!("encoder.{l}."));
        FreezeSpec {
            trainable: store
                .names()
                .filter(|n| {
                    n.starts_with("head.") || last.as_deref().is_some_and(|p| n.starts_with(p))
                })
                .map(String::from)
                .collect(),
        }
    }

    pub fn is_trainable(&self, name: &str) -> bool {
        self.trainable.contains(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.trainable.iter().map(String::as_str)
    }

    /// Trainable scalars over all scalars.
    pub fn trainable_fraction<T: Real>(&self, store: &ParamStore<T>) -> f64 {
        store.scalar_count(|n| self.is_trainable(n)) as f64 / store.scalar_count(|_| true) as f64
    }
}
