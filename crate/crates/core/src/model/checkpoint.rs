//! Checkpoint layout: a directory holding `checkpoint.json` (config, head,
//! label space, named parameter table with shapes and byte offsets) and
//! `params.bin` (all parameters as little-endian f32, table order).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, ParamStore, Provenance, TargetNorm};
use crate::error::{Error, Result};
use crate::hash::sha256_hex;
use crate::heads::HeadKind;
use crate::numerics::Tensor;

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const PARAMS_FILE: &str = "params.bin";
const FORMAT_NAME: &str = "wavefm-checkpoint";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    config: ModelConfig,
    head: HeadKind,
    classes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target_norm: Option<TargetNorm>,
    provenance: Provenance,
    params: Vec<Entry>,
    blob_bytes: usize,
    blob_sha256: String,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

pub fn save_checkpoint(model: &Model, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let mut blob = Vec::with_capacity(model.params.scalar_count(|_| true) * 4);
    let mut params = Vec::new();
    for (name, t) in model.params.iter() {
        params.push(Entry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            offset: blob.len(),
        });
        for v in t.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = Manifest {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        config: model.config,
        head: model.head,
        classes: model.classes.clone(),
        target_norm: model.target_norm,
        provenance: model.provenance.clone(),
        params,
        blob_bytes: blob.len(),
        blob_sha256: sha256_hex(&blob),
    };
    let bin = dir.join(PARAMS_FILE);
    fs::write(&bin, &blob).map_err(Error::io(&bin))?;
    let json = dir.join(CHECKPOINT_FILE);
    fs::write(&json, serde_json::to_string_pretty(&manifest)?).map_err(Error::io(&json))?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<Model> {
    let json = dir.join(CHECKPOINT_FILE);
    let text = fs::read_to_string(&json).map_err(Error::io(&json))?;
    let m: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", json.display())))?;
    if m.format != FORMAT_NAME || m.version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint {} v{}",
            m.format, m.version
        )));
    }
    m.config.validate()?;
    let bin = dir.join(PARAMS_FILE);
    let blob = fs::read(&bin).map_err(Error::io(&bin))?;
    if blob.len() != m.blob_bytes || sha256_hex(&blob) != m.blob_sha256 {
        return Err(Error::Checkpoint(format!(
            "{} does not match its manifest",
            bin.display()
        )));
    }
    let mut params = ParamStore::new();
    for e in &m.params {
        let len: usize = e.shape.iter().product();
        let bytes = blob.get(e.offset..e.offset + 4 * len).ok_or_else(|| {
            Error::Checkpoint(format!("parameter `{}` runs past the blob", e.name))
        })?;
        let data = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        params.insert(e.name.clone(), Tensor::new(&e.shape, data)?);
    }
    let model = Model {
        config: m.config,
        params,
        head: m.head,
        classes: m.classes,
        target_norm: m.target_norm,
        provenance: m.provenance,
    };
    model.check_head()?;
    Ok(model)
}
