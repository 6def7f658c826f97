//! Experiment configuration, layered as built-in defaults < TOML file <
//! command-line flags.

use std::path::Path;

use serde::{Deserialize, Serialize};
use wavefm::dataset::DEFAULT_RATIOS;
use wavefm::model::ModelConfig;
use wavefm::training::{Phase, TrainConfig};
use wavefm::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub supervised: TrainConfig,
    pub ssl: TrainConfig,
    pub finetune_cls: TrainConfig,
    pub finetune_reg: TrainConfig,
    /// Train/val/test ratios of a fine-tuning pool without a fixed
    /// per-class count; with one, the remainder splits val:test by them.
    pub finetune_ratios: [f64; 3],
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelConfig::default(),
            supervised: TrainConfig::new(Phase::PretrainSupervised),
            ssl: TrainConfig::new(Phase::PretrainSsl),
            finetune_cls: TrainConfig::new(Phase::FinetuneCls),
            finetune_reg: TrainConfig::new(Phase::FinetuneReg),
            finetune_ratios: DEFAULT_RATIOS,
        }
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl ExperimentConfig {
    /// Defaults overlaid with the tables present in `text`.
    pub fn parse(text: &str) -> Result<Self> {
        let over: toml::Table = toml::from_str(text)?;
        let mut base = toml::Table::try_from(ExperimentConfig::default())
            .map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut base, over);
        let cfg: ExperimentConfig = base.try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(ExperimentConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        for (phase, cfg) in [
            (Phase::PretrainSupervised, &self.supervised),
            (Phase::PretrainSsl, &self.ssl),
            (Phase::FinetuneCls, &self.finetune_cls),
            (Phase::FinetuneReg, &self.finetune_reg),
        ] {
            if cfg.phase != phase {
                return Err(Error::Config(format!(
                    "section for {} declares phase {}",
                    phase.name(),
                    cfg.phase.name()
                )));
            }
            cfg.validate()?;
        }
        Ok(())
    }

    pub fn phase(&self, phase: Phase) -> &TrainConfig {
        match phase {
            Phase::PretrainSupervised => &self.supervised,
            Phase::PretrainSsl => &self.ssl,
            Phase::FinetuneCls => &self.finetune_cls,
            Phase::FinetuneReg => &self.finetune_reg,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_defaults() {
        assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn file_overrides_only_the_keys_it_names() {
        let cfg = ExperimentConfig::parse("[model]\nd_model = 64\n[ssl]\nepochs = 3\n").unwrap();
        let base = ExperimentConfig::default();
        assert_eq!(cfg.model.d_model, 64);
        assert_eq!(cfg.model.layers, base.model.layers);
        assert_eq!(cfg.ssl.epochs, 3);
        assert_eq!(cfg.ssl.lr, base.ssl.lr);
        assert_eq!(cfg.supervised, base.supervised);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        for text in [
            "[model]\nwidth = 3\n",
            "[model]\nheads = 3\n",
            "[ssl]\nmask_ratio = 1.5\n",
            "[ssl]\nphase = \"finetune_cls\"\n",
            "unknown = 1\n",
        ] {
            let e = ExperimentConfig::parse(text).unwrap_err();
            assert!(e.is_usage(), "{text}: {e}");
        }
    }

    #[test]
    fn shipped_reduced_config_parses() {
        let text = include_str!("../../../configs/reduced.toml");
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.model, ModelConfig::reduced());
    }
}
