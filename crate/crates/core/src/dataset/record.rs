use serde::{Deserialize, Serialize};

/// Number of signal channels: real/imaginary for IQ, in-phase/quadrature
/// for CIR.
pub const CHANNELS: usize = 2;

/// One `2 × L` timeseries with its labels.
///
/// `data` is channel-major: the first `L` values are channel 0, the next `L`
/// are channel 1.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalRecord {
    pub id: u64,
    pub data: Vec<f32>,
    pub label: Option<usize>,
    pub ranging_error_mm: Option<f32>,
    pub los: Option<bool>,
    pub meta: RecordMeta,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    /// Class or environment that produced the record.
    pub source: String,
    pub seed: u64,
    pub snr_db: Option<f32>,
}

impl SignalRecord {
    pub fn length(&self) -> usize {
        self.data.len() / CHANNELS
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let l = self.length();
        &self.data[c * l..(c + 1) * l]
    }

    /// Stratum used for stratified splitting: the class id for
    /// classification records, LOS (0) / NLOS (1) for ranging records.
    pub fn stratum(&self) -> usize {
        match (self.label, self.los) {
            (Some(label), _) => label,
            (None, Some(los)) => usize::from(!los),
            (None, None) => 0,
        }
    }
}

/// Which labels a corpus carries.
///
/// Ranging corpora hold the ranging error and the LOS flag of every record;
/// both come from the same channel ground truth, so LOS classification and
/// ranging regression run on one corpus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelFamily {
    Classification,
    Ranging,
}

impl std::fmt::Display for LabelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LabelFamily::Classification => "classification",
            LabelFamily::Ranging => "ranging",
        })
    }
}

/// Class names for the LOS task derived from a ranging corpus.
pub const LOS_CLASSES: [&str; 2] = ["los", "nlos"];

/// Per-record, per-channel standardization to zero mean and unit variance.
/// Constant channels (including all-zero padding) map to zeros.
pub fn standardize(record: &SignalRecord) -> SignalRecord {
    let mut out = record.clone();
    let l = record.length();
    for chan in out.data.chunks_mut(l) {
        let n = chan.len() as f64;
        let mean = chan.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = chan.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        let inv = 1.0 / (var + 1e-8).sqrt();
        for v in chan.iter_mut() {
            *v = ((*v as f64 - mean) * inv) as f32;
        }
    }
    out
}
