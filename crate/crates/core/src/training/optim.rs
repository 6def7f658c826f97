use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ParamStore;
use crate::numerics::{Real, Tensor};

/// AdamW with decoupled weight decay: every updated parameter first
/// shrinks by `lr·wd·p`, then takes the bias-corrected Adam step.
/// Parameters without a gradient are left untouched.
#[derive(Clone, Debug)]
pub struct AdamW<T: Real = f32> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: usize,
    moments: IndexMap<String, (Vec<T>, Vec<T>)>,
}

impl<T: Real> Default for AdamW<T> {
    fn default() -> Self {
        AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            moments: IndexMap::new(),
        }
    }
}

impl<T: Real> AdamW<T> {
    pub fn steps(&self) -> usize {
        self.step
    }

    pub fn step(
        &mut self,
        params: &mut ParamStore<T>,
        grads: &[(String, Tensor<T>)],
        lr: f64,
        wd: f64,
    ) -> Result<()> {
        self.step += 1;
        for (name, g) in grads {
            if !g.is_finite() {
                return Err(Error::Training {
                    step: self.step,
                    detail: format!("non-finite gradient for `{name}`"),
                });
            }
            if params.get(name)?.shape() != g.shape() {
                return Err(Error::shape(
                    "adamw",
                    format!("gradient {:?} for `{name}`", g.shape()),
                ));
            }
        }
        let (b1, b2) = (T::from_f64_lossy(self.beta1), T::from_f64_lossy(self.beta2));
        let one = T::one();
        let c1 = T::from_f64_lossy(1.0 - self.beta1.powi(self.step as i32));
        let c2 = T::from_f64_lossy(1.0 - self.beta2.powi(self.step as i32));
        let lr_t = T::from_f64_lossy(lr);
        let shrink = T::from_f64_lossy(1.0 - lr * wd);
        let eps = T::from_f64_lossy(self.eps);
        for (name, g) in grads {
            let p = params.get_mut(name)?;
            let (m, v) = self
                .moments
                .entry(name.clone())
                .or_insert_with(|| (vec![T::zero(); g.len()], vec![T::zero(); g.len()]));
            for (((pi, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *pi *= shrink;
                *mi = b1 * *mi + (one - b1) * gi;
                *vi = b2 * *vi + (one - b2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *pi -= lr_t * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerConfig {
    pub factor: f64,
    pub patience: usize,
    /// Relative improvement a loss needs to count as better than the best.
    pub threshold: f64,
    /// Training stops once the learning rate falls below this.
    pub min_lr: f64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            factor: 0.7,
            patience: 3,
            threshold: 1e-4,
            min_lr: 1e-7,
        }
    }
}

/// Reduce-on-plateau over the validation loss. After `patience`
/// consecutive epochs without improvement the rate is multiplied by
/// `factor` and the count restarts; the rate after `k` reductions is
/// `lr₀ · factor^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauScheduler {
    pub config: SchedulerConfig,
    pub base_lr: f64,
    pub reductions: u32,
    pub best: Option<f64>,
    pub bad_epochs: usize,
}

impl PlateauScheduler {
    pub fn new(base_lr: f64, config: SchedulerConfig) -> Self {
        PlateauScheduler {
            config,
            base_lr,
            reductions: 0,
            best: None,
            bad_epochs: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.base_lr * self.config.factor.powi(self.reductions as i32)
    }

    /// Records one epoch's validation loss and returns the rate for the
    /// next epoch.
    pub fn step(&mut self, val_loss: f64) -> f64 {
        match self.best {
            Some(best) if val_loss >= best * (1.0 - self.config.threshold) => {
                self.bad_epochs += 1;
                if self.bad_epochs >= self.config.patience {
                    self.reductions += 1;
                    self.bad_epochs = 0;
                }
            }
            _ => {
                self.best = Some(val_loss);
                self.bad_epochs = 0;
            }
        }
        self.lr()
    }
}
