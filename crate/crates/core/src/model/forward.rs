use indexmap::IndexMap;

use super::{ModelConfig, ParamStore};
use crate::encoder::{encode, maybe_dropout, LayerVars};
use crate::error::{Error, Result};
use crate::heads::{
    flatten_batch, reconstruct_on_tape, two_layer_on_tape, HeadKind, ReconVars, TwoLayerVars,
};
use crate::numerics::rng::StreamRng;
use crate::numerics::{Real, Tape, Tensor, Var};

/// Parameters registered on a tape, by name. Names accepted by
/// `trainable` become gradient-carrying leaves; the rest are constants.
pub struct Bound {
    vars: IndexMap<String, Var>,
}

impl Bound {
    pub fn new<'a, T: Real>(
        tape: &mut Tape<'a, T>,
        store: &'a ParamStore<T>,
        trainable: impl Fn(&str) -> bool,
    ) -> Self {
        let vars = store
            .iter()
            .map(|(name, t)| {
                let v = if trainable(name) {
                    tape.param(t)
                } else {
                    tape.constant(t)
                };
                (name.to_string(), v)
            })
            .collect();
        Bound { vars }
    }

    pub fn var(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))
    }

    /// Points `name` at another tape variable.
    pub fn set(&mut self, name: &str, var: Var) {
        self.vars.insert(name.to_string(), var);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

/// Embeds and encodes `patches` (`B·2·N × P`, see
/// [`crate::patch::segment_batch`]). Rows listed in `token_rows` are
/// replaced by the learned mask token after projection. Dropout is active
/// only when `train` holds a generator.
pub fn encode_batch<T: Real>(
    tape: &mut Tape<'_, T>,
    bound: &Bound,
    cfg: &ModelConfig,
    patches: Tensor<T>,
    token_rows: Option<&[usize]>,
    train: &mut Option<&mut StreamRng>,
) -> Result<Var> {
    let x = tape.constant_owned(patches);
    let z = tape.matmul(x, bound.var("embed.w")?)?;
    let mut z = tape.add_bias(z, bound.var("embed.b")?)?;
    if let Some(rows) = token_rows.filter(|r| !r.is_empty()) {
        z = tape.replace_rows(z, bound.var("embed.mask_token")?, rows)?;
    }
    let z = tape.add_tiled(z, bound.var("embed.pos")?)?;
    let z = maybe_dropout(tape, z, cfg.dropout, train)?;
    let layers = (0..cfg.layers)
        .map(|l| LayerVars::bind(l, |name| bound.var(name)))
        .collect::<Result<Vec<_>>>()?;
    encode(tape, z, &layers, &cfg.encoder(), cfg.n_patches(), train)
}

/// Applies the head: `B × K` logits, `B × 1` predictions, or `B·2·N × P`
/// reconstructed patches.
pub fn head_output<T: Real>(
    tape: &mut Tape<'_, T>,
    bound: &Bound,
    kind: HeadKind,
    encoded: Var,
    batch: usize,
) -> Result<Var> {
    let p = kind.prefix();
    match kind {
        HeadKind::Reconstruction => {
            let vars = ReconVars {
                w: bound.var(&format!("{p}.w"))?,
                b: bound.var(&format!("{p}.b"))?,
            };
            reconstruct_on_tape(tape, encoded, &vars)
        }
        HeadKind::Classification { .. } | HeadKind::Regression => {
            let f = flatten_batch(tape, encoded, batch)?;
            let vars = TwoLayerVars {
                w2: bound.var(&format!("{p}.w2"))?,
                b2: bound.var(&format!("{p}.b2"))?,
                w1: bound.var(&format!("{p}.w1"))?,
                b1: bound.var(&format!("{p}.b1"))?,
            };
            two_layer_on_tape(tape, f, &vars)
        }
    }
}
