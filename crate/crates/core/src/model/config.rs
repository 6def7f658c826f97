use serde::{Deserialize, Serialize};

use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::patch::PatchConfig;

/// Architecture hyperparameters shared by every training phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub length: usize,
    pub patch_len: usize,
    pub stride: usize,
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub ff_dim: usize,
    /// Dropout after adding the position table.
    pub dropout: f64,
    pub attn_dropout: f64,
    pub residual_dropout: f64,
    /// Hidden width of the pre-training classification/regression heads.
    pub head_hidden: usize,
    /// Hidden width of heads attached for fine-tuning. The fine-tuned
    /// set (last layer plus this head) stays under 30% of all parameters
    /// at the default size only for widths up to 7.
    pub finetune_head_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            length: 4096,
            patch_len: 128,
            stride: 128,
            d_model: 128,
            heads: 8,
            layers: 4,
            ff_dim: 512,
            dropout: 0.1,
            attn_dropout: 0.1,
            residual_dropout: 0.1,
            head_hidden: 256,
            finetune_head_hidden: 7,
        }
    }
}

impl ModelConfig {
    /// Desk-scale variant: `D = 64`, two layers.
    pub fn reduced() -> Self {
        ModelConfig {
            d_model: 64,
            layers: 2,
            ff_dim: 256,
            ..ModelConfig::default()
        }
    }

    pub fn patch(&self) -> PatchConfig {
        PatchConfig {
            length: self.length,
            patch_len: self.patch_len,
            stride: self.stride,
            d_model: self.d_model,
            dropout: self.dropout,
        }
    }

    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig {
            d_model: self.d_model,
            heads: self.heads,
            layers: self.layers,
            ff_dim: self.ff_dim,
            attn_dropout: self.attn_dropout,
            residual_dropout: self.residual_dropout,
        }
    }

    pub fn n_patches(&self) -> usize {
        self.patch().n_patches().expect("validated config")
    }

    /// Width of the flattened two-channel features, `2·N·D`.
    pub fn feature_width(&self) -> usize {
        2 * self.n_patches() * self.d_model
    }

    pub fn validate(&self) -> Result<()> {
        self.patch().n_patches()?;
        self.encoder().validate()?;
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout rate {} must lie in [0, 1)",
                self.dropout
            )));
        }
        if self.head_hidden == 0 || self.finetune_head_hidden == 0 {
            return Err(Error::Config("head widths must be positive".into()));
        }
        Ok(())
    }
}
