//! Synthetic IQ and CIR corpora.
//!
//! IQ classes are gated waveforms (tone, chirp, QPSK, multicarrier) at
//! distinct carriers with complex white noise at a per-record SNR. CIR
//! records place 150 taps at the head of the window: a first path, an
//! optional NLOS excess delay before the strongest path, and a decaying
//! multipath tail. The ranging label grows linearly with the excess delay.

mod catalog;
mod cir;
mod iq;
mod separability;

use std::collections::HashSet;
use std::path::Path;

pub use catalog::{
    check_technologies, Catalog, CirSpec, ModulationKind, TechnologySpec, CIR_TAPS,
    DEFAULT_CATALOG_TOML,
};
pub use cir::{gen_cir, gen_cir_with};
pub use iq::{gen_iq, gen_iq_with};
pub use separability::{dominant_bin, nearest_centroid_accuracy};

use crate::dataset::{
    stratified_split, write_container, ContainerSummary, Corpus, LabelFamily, DEFAULT_RATIOS,
};
use crate::error::{Error, Result};

/// Test hooks for the generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SynthOptions {
    /// Add channel and label noise. Off only in tests.
    pub noise: bool,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions { noise: true }
    }
}

/// Classification corpus with `per_class_count` records per technology and
/// default stratified splits. Record ids are `class · per_class_count + i`.
pub fn generate_corpus(
    specs: &[TechnologySpec],
    per_class_count: usize,
    length: usize,
    seed: u64,
) -> Result<Corpus> {
    if specs.len() < 2 {
        return Err(Error::Config(format!(
            "a classification corpus needs at least 2 technologies, got {}",
            specs.len()
        )));
    }
    check_technologies(specs)?;
    let mut records = Vec::with_capacity(specs.len() * per_class_count);
    for (class, spec) in specs.iter().enumerate() {
        for mut r in gen_iq(spec, per_class_count, length, seed)? {
            r.id += (class * per_class_count) as u64;
            r.label = Some(class);
            records.push(r);
        }
    }
    let splits = Some(stratified_split(&records, DEFAULT_RATIOS, seed)?);
    Ok(Corpus {
        length,
        family: LabelFamily::Classification,
        classes: specs.iter().map(|s| s.name.clone()).collect(),
        records,
        splits,
    })
}

/// Ranging corpus: for every environment, `per_class_count` LOS and
/// `per_class_count` NLOS records, with default splits stratified by LOS.
pub fn generate_cir_corpus(
    envs: &[CirSpec],
    per_class_count: usize,
    length: usize,
    seed: u64,
) -> Result<Corpus> {
    if envs.is_empty() {
        return Err(Error::Config(
            "a CIR corpus needs at least one environment".into(),
        ));
    }
    let mut names = HashSet::new();
    let mut records = Vec::with_capacity(envs.len() * 2 * per_class_count);
    for env in envs {
        if !names.insert(env.env_name.as_str()) {
            return Err(Error::DuplicateClass(env.env_name.clone()));
        }
        for los in [true, false] {
            for mut r in gen_cir(env, los, per_class_count, length, seed)? {
                r.id = records.len() as u64;
                records.push(r);
            }
        }
    }
    let splits = Some(stratified_split(&records, DEFAULT_RATIOS, seed)?);
    Ok(Corpus {
        length,
        family: LabelFamily::Ranging,
        classes: envs.iter().map(|e| e.env_name.clone()).collect(),
        records,
        splits,
    })
}

/// Generates a classification corpus and writes it to `out`.
pub fn build_corpus(
    specs: &[TechnologySpec],
    per_class_count: usize,
    length: usize,
    seed: u64,
    out: &Path,
) -> Result<ContainerSummary> {
    write_container(&generate_corpus(specs, per_class_count, length, seed)?, out)
}

/// Generates a ranging corpus and writes it to `out`.
pub fn build_cir_corpus(
    envs: &[CirSpec],
    per_class_count: usize,
    length: usize,
    seed: u64,
    out: &Path,
) -> Result<ContainerSummary> {
    write_container(
        &generate_cir_corpus(envs, per_class_count, length, seed)?,
        out,
    )
}
