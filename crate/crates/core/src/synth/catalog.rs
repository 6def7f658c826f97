use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of active CIR taps at the head of every CIR record.
pub const CIR_TAPS: usize = 150;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulationKind {
    /// Gated complex exponential at the carrier.
    Tone,
    /// Linear up-chirps of width `bandwidth_fraction`, one per `symbol_len`.
    Chirp,
    /// QPSK symbols of `symbol_len` samples on the carrier; the occupied
    /// band follows from the symbol rate.
    PskLike,
    /// Multicarrier symbols: random QPSK on subcarriers spaced
    /// `length / symbol_len` apart across `bandwidth_fraction`.
    NoiseBurst,
}

/// Waveform recipe for one synthetic technology class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TechnologySpec {
    pub name: String,
    pub carrier_cycles_per_window: f64,
    pub bandwidth_fraction: f64,
    /// Fraction of the window holding one contiguous transmission.
    pub burst_duty: f64,
    pub symbol_len: usize,
    pub modulation_kind: ModulationKind,
    pub snr_db_range: [f64; 2],
}

impl TechnologySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("technology `{}`: {what}", self.name)));
        if self.name.is_empty() {
            return Err(Error::Config("technology with empty name".into()));
        }
        if !(self.bandwidth_fraction > 0.0 && self.bandwidth_fraction <= 1.0) {
            return bad("bandwidth_fraction must lie in (0, 1]");
        }
        if !(self.burst_duty > 0.0 && self.burst_duty <= 1.0) {
            return bad("burst_duty must lie in (0, 1]");
        }
        if self.symbol_len == 0 {
            return bad("symbol_len must be positive");
        }
        let [lo, hi] = self.snr_db_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad("snr_db_range must be finite with low <= high");
        }
        if !self.carrier_cycles_per_window.is_finite() {
            return bad("carrier must be finite");
        }
        Ok(())
    }

    /// Specs must differ in at least one of these to count as distinct.
    fn signature(&self) -> (ModulationKind, u64, usize) {
        (
            self.modulation_kind,
            self.bandwidth_fraction.to_bits(),
            self.symbol_len,
        )
    }
}

fn default_label_noise() -> f64 {
    5.0
}

fn default_tap_noise() -> f64 {
    0.01
}

/// Channel recipe for one synthetic UWB-like environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CirSpec {
    pub env_name: String,
    pub first_path_index: usize,
    pub n_multipath: usize,
    pub decay_per_tap: f64,
    pub nlos_extra_delay: usize,
    /// NLOS excess delay is drawn uniformly from
    /// `nlos_extra_delay ..= nlos_extra_delay + nlos_delay_spread`.
    #[serde(default)]
    pub nlos_delay_spread: usize,
    pub nlos_first_path_atten_db: f64,
    /// Millimetres of ranging error per tap of excess delay.
    pub range_bias_per_delay: f64,
    /// Standard deviation of the zero-mean label noise, mm.
    #[serde(default = "default_label_noise")]
    pub label_noise_mm: f64,
    /// Standard deviation of complex noise on the active taps.
    #[serde(default = "default_tap_noise")]
    pub tap_noise_std: f64,
}

impl CirSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| {
            Err(Error::Config(format!(
                "environment `{}`: {what}",
                self.env_name
            )))
        };
        if self.first_path_index >= CIR_TAPS {
            return bad("first_path_index must be below 150");
        }
        if self.nlos_extra_delay == 0 {
            return bad("nlos_extra_delay must be at least 1");
        }
        if self.first_path_index + self.nlos_extra_delay + self.nlos_delay_spread + self.n_multipath
            >= CIR_TAPS
        {
            return bad("first path, NLOS delay and multipath tail must fit in 150 taps");
        }
        if !(self.decay_per_tap > 0.0) || !(self.nlos_first_path_atten_db > 0.0) {
            return bad("decay_per_tap and nlos_first_path_atten_db must be positive");
        }
        if !(self.label_noise_mm >= 0.0)
            || !(self.tap_noise_std >= 0.0)
            || !self.range_bias_per_delay.is_finite()
        {
            return bad("noise levels must be nonnegative and the bias finite");
        }
        Ok(())
    }
}

/// A catalog of technologies and environments, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub length: usize,
    #[serde(default = "default_per_class")]
    pub per_class_count: usize,
    #[serde(default, rename = "technology")]
    pub technologies: Vec<TechnologySpec>,
    #[serde(default, rename = "environment")]
    pub environments: Vec<CirSpec>,
}

fn default_per_class() -> usize {
    500
}

pub const DEFAULT_CATALOG_TOML: &str = include_str!("../../../../configs/catalog.toml");

impl Catalog {
    pub fn parse(text: &str) -> Result<Catalog> {
        let catalog: Catalog = toml::from_str(text)?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn load(path: &Path) -> Result<Catalog> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Catalog::parse(&text)
    }

    /// The catalog shipped with the crate.
    pub fn builtin() -> Catalog {
        Catalog::parse(DEFAULT_CATALOG_TOML).expect("shipped catalog is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 || self.per_class_count == 0 {
            return Err(Error::Config(
                "length and per_class_count must be positive".into(),
            ));
        }
        check_technologies(&self.technologies)?;
        let mut names = std::collections::HashSet::new();
        for env in &self.environments {
            env.validate()?;
            if !names.insert(env.env_name.as_str()) {
                return Err(Error::DuplicateClass(env.env_name.clone()));
            }
        }
        Ok(())
    }

    pub fn technology(&self, name: &str) -> Result<&TechnologySpec> {
        self.technologies
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::UnknownClass(name.to_string()))
    }

    pub fn environment(&self, name: &str) -> Result<&CirSpec> {
        self.environments
            .iter()
            .find(|e| e.env_name == name)
            .ok_or_else(|| Error::UnknownClass(name.to_string()))
    }
}

/// Validates each spec plus name uniqueness and pairwise distinctness.
pub fn check_technologies(specs: &[TechnologySpec]) -> Result<()> {
    for (i, s) in specs.iter().enumerate() {
        s.validate()?;
        for t in &specs[..i] {
            if t.name == s.name {
                return Err(Error::DuplicateClass(s.name.clone()));
            }
            if t.signature() == s.signature() {
                return Err(Error::Config(format!(
                    "technologies `{}` and `{}` share modulation, bandwidth and symbol length",
                    t.name, s.name
                )));
            }
        }
    }
    Ok(())
}
