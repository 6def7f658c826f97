//! On-disk corpus container: `manifest.json` plus raw little-endian f32
//! shards.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::record::{LabelFamily, RecordMeta, SignalRecord, CHANNELS};
use super::split::SplitAssignment;
use crate::error::{Error, Result};

pub const FORMAT_NAME: &str = "wavefm-corpus";
pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_PER_SHARD: usize = 256;

/// A labeled corpus in memory.
///
/// `classes` names the label space: technology names for classification
/// corpora, environment names for ranging corpora (ranging records carry
/// their LOS flag separately).
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub length: usize,
    pub family: LabelFamily,
    pub classes: Vec<String>,
    pub records: Vec<SignalRecord>,
    pub splits: Option<SplitAssignment>,
}

impl Corpus {
    pub fn class_index(&self, name: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownClass(name.to_string()))
    }

    /// Records whose ids appear in `ids`, in `ids` order.
    pub fn select(&self, ids: &[u64]) -> Result<Vec<SignalRecord>> {
        let index: std::collections::HashMap<u64, usize> = self
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id, i))
            .collect();
        ids.iter()
            .map(|id| {
                index
                    .get(id)
                    .map(|&i| self.records[i].clone())
                    .ok_or_else(|| {
                        Error::Integrity(format!("split references missing record id {id}"))
                    })
            })
            .collect()
    }

    /// Per-class record counts (by stratum).
    pub fn class_counts(&self) -> Vec<usize> {
        let width = match self.family {
            LabelFamily::Classification => self.classes.len(),
            LabelFamily::Ranging => 2,
        };
        let mut counts = vec![0; width];
        for r in &self.records {
            if let Some(c) = counts.get_mut(r.stratum()) {
                *c += 1;
            }
        }
        counts
    }

    /// Checks the label-family and shape invariants.
    pub fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::Insufficient("corpus has no records".into()));
        }
        for r in &self.records {
            if r.data.len() != CHANNELS * self.length {
                return Err(Error::shape(
                    "corpus",
                    format!(
                        "record {} holds {} values, expected {}",
                        r.id,
                        r.data.len(),
                        CHANNELS * self.length
                    ),
                ));
            }
            let ok = match self.family {
                LabelFamily::Classification => {
                    matches!(r.label, Some(l) if l < self.classes.len())
                        && r.ranging_error_mm.is_none()
                        && r.los.is_none()
                }
                LabelFamily::Ranging => {
                    r.label.is_none() && r.ranging_error_mm.is_some() && r.los.is_some()
                }
            };
            if !ok {
                return Err(Error::Format(format!(
                    "record {} does not carry exactly the {} labels",
                    r.id, self.family
                )));
            }
        }
        let mut ids: Vec<u64> = self.records.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Format("duplicate record ids".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    length: usize,
    channels: usize,
    label_family: LabelFamily,
    classes: Vec<String>,
    class_counts: Vec<usize>,
    sample_count: usize,
    shards: Vec<ShardEntry>,
    ids: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ranging_error_mm: Option<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    los: Option<Vec<bool>>,
    meta: Vec<RecordMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    splits: Option<SplitAssignment>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ShardEntry {
    file: String,
    records: usize,
}

/// Summary of a written container.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContainerSummary {
    pub sample_count: usize,
    pub classes: Vec<String>,
    pub class_counts: Vec<usize>,
    pub shards: usize,
}

/// Writes `corpus` into directory `dir`, creating it if needed.
pub fn write_container(corpus: &Corpus, dir: &Path) -> Result<ContainerSummary> {
    corpus.validate()?;
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let mut shards = Vec::new();
    for (s, chunk) in corpus.records.chunks(RECORDS_PER_SHARD).enumerate() {
        let file = format!("shard_{s:04}.bin");
        let path = dir.join(&file);
        let mut bytes = Vec::with_capacity(chunk.len() * CHANNELS * corpus.length * 4);
        for r in chunk {
            for v in &r.data {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        fs::File::create(&path)
            .and_then(|mut f| f.write_all(&bytes))
            .map_err(Error::io(&path))?;
        shards.push(ShardEntry {
            file,
            records: chunk.len(),
        });
    }
    let records = &corpus.records;
    let classification = corpus.family == LabelFamily::Classification;
    let manifest = Manifest {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        length: corpus.length,
        channels: CHANNELS,
        label_family: corpus.family,
        classes: corpus.classes.clone(),
        class_counts: corpus.class_counts(),
        sample_count: records.len(),
        shards,
        ids: records.iter().map(|r| r.id).collect(),
        labels: classification.then(|| records.iter().map(|r| r.label.unwrap()).collect()),
        ranging_error_mm: (!classification).then(|| {
            records
                .iter()
                .map(|r| r.ranging_error_mm.unwrap())
                .collect()
        }),
        los: (!classification).then(|| records.iter().map(|r| r.los.unwrap()).collect()),
        meta: records.iter().map(|r| r.meta.clone()).collect(),
        splits: corpus.splits.clone(),
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text).map_err(Error::io(&path))?;
    Ok(ContainerSummary {
        sample_count: manifest.sample_count,
        classes: manifest.classes,
        class_counts: manifest.class_counts,
        shards: manifest.shards.len(),
    })
}

fn check_len<T>(name: &str, v: &Option<Vec<T>>, n: usize) -> Result<()> {
    match v {
        Some(v) if v.len() != n => Err(Error::Integrity(format!(
            "{name} has {} entries, sample_count is {n}",
            v.len()
        ))),
        _ => Ok(()),
    }
}

/// Reads a container written by [`write_container`].
pub fn read_container(dir: &Path) -> Result<Corpus> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(Error::io(&path))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("format").and_then(|v| v.as_str()) != Some(FORMAT_NAME) {
        return Err(Error::Format(format!(
            "{} is not a {FORMAT_NAME} manifest",
            path.display()
        )));
    }
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(FORMAT_VERSION) => {}
        other => {
            return Err(Error::Format(format!(
                "unsupported container version {other:?}"
            )))
        }
    }
    let m: Manifest = serde_json::from_value(value).map_err(|e| Error::Format(e.to_string()))?;
    if m.channels != CHANNELS || m.length == 0 {
        return Err(Error::Format(format!(
            "unsupported layout: {} channels of length {}",
            m.channels, m.length
        )));
    }
    let n = m.sample_count;
    let listed: usize = m.shards.iter().map(|s| s.records).sum();
    if listed != n || m.ids.len() != n || m.meta.len() != n {
        return Err(Error::Integrity(format!(
            "sample_count {n}, shards list {listed}, ids {}, meta {}",
            m.ids.len(),
            m.meta.len()
        )));
    }
    check_len("labels", &m.labels, n)?;
    check_len("ranging_error_mm", &m.ranging_error_mm, n)?;
    check_len("los", &m.los, n)?;

    let per_record = CHANNELS * m.length;
    let mut records = Vec::with_capacity(n);
    for shard in &m.shards {
        let spath = dir.join(&shard.file);
        let bytes = fs::read(&spath).map_err(Error::io(&spath))?;
        let expected = shard.records * per_record * 4;
        if bytes.len() != expected {
            return Err(Error::Integrity(format!(
                "{} holds {} bytes ({} records), manifest expects {} records",
                shard.file,
                bytes.len(),
                bytes.len() / (per_record * 4),
                shard.records
            )));
        }
        for chunk in bytes.chunks_exact(per_record * 4) {
            let i = records.len();
            let data = chunk
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            records.push(SignalRecord {
                id: m.ids[i],
                data,
                label: m.labels.as_ref().map(|v| v[i]),
                ranging_error_mm: m.ranging_error_mm.as_ref().map(|v| v[i]),
                los: m.los.as_ref().map(|v| v[i]),
                meta: m.meta[i].clone(),
            });
        }
    }
    let corpus = Corpus {
        length: m.length,
        family: m.label_family,
        classes: m.classes,
        records,
        splits: m.splits,
    };
    corpus.validate().map_err(|e| match e {
        Error::Format(s) | Error::Insufficient(s) => Error::Integrity(s),
        other => other,
    })?;
    Ok(corpus)
}
