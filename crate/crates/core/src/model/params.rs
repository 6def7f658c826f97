use indexmap::IndexMap;
use sha2::{Digest, Sha256};

use super::ModelConfig;
use crate::encoder::layer_param_names;
use crate::error::{Error, Result};
use crate::hash::hex;
use crate::heads::HeadKind;
use crate::numerics::rng::{stream, tag};
use crate::numerics::{Real, Tensor};

pub const INIT_STD: f64 = 0.02;

/// Named parameter tensors in a fixed insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T: Real = f32> {
    tensors: IndexMap<String, Tensor<T>>,
}

enum Init {
    Normal,
    Zeros,
    Ones,
}

fn init<T: Real>(name: &str, shape: &[usize], how: Init, seed: u64) -> Tensor<T> {
    match how {
        Init::Normal => Tensor::randn(
            shape,
            INIT_STD,
            &mut stream(seed, &[tag("init"), tag(name)]),
        ),
        Init::Zeros => Tensor::zeros(shape),
        Init::Ones => Tensor::full(shape, T::one()),
    }
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            tensors: IndexMap::new(),
        }
    }

    /// Embedding and encoder parameters. Each tensor draws from its own
    /// stream keyed by name, so adding or removing heads leaves the others
    /// unchanged.
    pub fn init_backbone(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let (p, d, n, ff) = (cfg.patch_len, cfg.d_model, cfg.n_patches(), cfg.ff_dim);
        let mut s = ParamStore::new();
        let mut put = |name: &str, shape: &[usize], how: Init| {
            s.tensors
                .insert(name.to_string(), init(name, shape, how, seed));
        };
        put("embed.w", &[p, d], Init::Normal);
        put("embed.b", &[d], Init::Zeros);
        put("embed.pos", &[n, d], Init::Normal);
        put("embed.mask_token", &[d], Init::Normal);
        for l in 0..cfg.layers {
            let names = layer_param_names(l);
            let shapes: [(&[usize], Init); 12] = [
                (&[d], Init::Ones),
                (&[d], Init::Zeros),
                (&[d, d], Init::Normal),
                (&[d, d], Init::Normal),
                (&[d, d], Init::Normal),
                (&[d, d], Init::Normal),
                (&[d], Init::Ones),
                (&[d], Init::Zeros),
                (&[d, ff], Init::Normal),
                (&[ff], Init::Zeros),
                (&[ff, d], Init::Normal),
                (&[d], Init::Zeros),
            ];
            for (name, (shape, how)) in names.iter().zip(shapes) {
                put(name, shape, how);
            }
        }
        Ok(s)
    }

    /// Removes every head and attaches a freshly initialized `kind` head.
    pub fn replace_head(&mut self, cfg: &ModelConfig, kind: HeadKind, hidden: usize, seed: u64) {
        self.tensors.retain(|name, _| !name.starts_with("head."));
        let prefix = kind.prefix();
        let mut put = |suffix: &str, shape: &[usize], how: Init| {
            let name = format!("{prefix}.{suffix}");
            let t = init(&name, shape, how, seed);
            self.tensors.insert(name, t);
        };
        match kind {
            HeadKind::Reconstruction => {
                put("w", &[cfg.d_model, cfg.patch_len], Init::Normal);
                put("b", &[cfg.patch_len], Init::Zeros);
            }
            HeadKind::Classification { classes } => {
                two_layer(&mut put, cfg.feature_width(), hidden, classes)
            }
            HeadKind::Regression => two_layer(&mut put, cfg.feature_width(), hidden, 1),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor<T>) {
        self.tensors.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar count of parameters accepted by `filter`.
    pub fn scalar_count(&self, filter: impl Fn(&str) -> bool) -> usize {
        self.iter()
            .filter(|(n, _)| filter(n))
            .map(|(_, t)| t.len())
            .sum()
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
        }
    }

    /// SHA-256 over names, shapes and little-endian values of the
    /// parameters accepted by `filter`.
    pub fn digest(&self, filter: impl Fn(&str) -> bool) -> String {
        let mut h = Sha256::new();
        for (name, t) in self.iter().filter(|(n, _)| filter(n)) {
            h.update(name.as_bytes());
            for &d in t.shape() {
                h.update((d as u64).to_le_bytes());
            }
            for v in t.data() {
                h.update(v.as_f64().to_le_bytes());
            }
        }
        hex(&h.finalize())
    }
}

fn two_layer(put: &mut impl FnMut(&str, &[usize], Init), width: usize, hidden: usize, out: usize) {
    put("w2", &[width, hidden], Init::Normal);
    put("b2", &[hidden], Init::Zeros);
    put("w1", &[hidden, out], Init::Normal);
    put("b1", &[out], Init::Zeros);
}
