use serde::{Deserialize, Serialize};

use crate::dataset::SignalRecord;
use crate::error::{Error, Result};
use crate::heads::HeadKind;
use crate::model::Model;
use crate::training::{argmax, class_target};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Regression,
}

/// Test-split metrics. Wall-clock fields stay `None` in reports that must
/// be reproducible byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: Task,
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub precision: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub recall: Vec<f64>,
    /// `confusion[true][predicted]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub confusion: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mae_mm: Option<f64>,
    /// Error left uncorrected: mean absolute label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mae_before_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_s_per_epoch: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation_scalars_peak: Option<usize>,
}

impl MetricsReport {
    fn empty(task: Task, samples: usize) -> Self {
        MetricsReport {
            task,
            samples,
            classes: Vec::new(),
            accuracy: None,
            precision: Vec::new(),
            recall: Vec::new(),
            confusion: Vec::new(),
            mae_mm: None,
            mae_before_mm: None,
            runtime_s_per_epoch: None,
            param_count: None,
            activation_scalars_peak: None,
        }
    }

    /// Plain-text rendering.
    pub fn to_table(&self) -> String {
        let mut s = format!("task      {:?}\nsamples   {}\n", self.task, self.samples);
        if let Some(a) = self.accuracy {
            s += &format!(
                "accuracy  {a:.4}\n\n{:<20} {:>9} {:>9}\n",
                "class", "precision", "recall"
            );
            for ((c, p), r) in self.classes.iter().zip(&self.precision).zip(&self.recall) {
                s += &format!("{c:<20} {p:>9.4} {r:>9.4}\n");
            }
            s += "\nconfusion (rows: true, columns: predicted)\n";
            for row in &self.confusion {
                s += &row.iter().map(|v| format!("{v:>6}")).collect::<String>();
                s.push('\n');
            }
        }
        if let (Some(m), Some(b)) = (self.mae_mm, self.mae_before_mm) {
            s += &format!("mae_mm         {m:.3}\nmae_before_mm  {b:.3}\n");
        }
        if let Some(p) = self.param_count {
            s += &format!("param_count    {p}\n");
        }
        if let Some(p) = self.activation_scalars_peak {
            s += &format!("activation_scalars_peak {p}\n");
        }
        if let Some(t) = self.runtime_s_per_epoch {
            s += &format!("runtime_s_per_epoch {t:.3}\n");
        }
        s
    }
}

/// `confusion[t][p]` counts of true class `t` predicted as `p`.
pub fn confusion_matrix(
    predicted: &[usize],
    truth: &[usize],
    classes: usize,
) -> Result<Vec<Vec<usize>>> {
    if predicted.len() != truth.len() {
        return Err(Error::shape(
            "confusion_matrix",
            format!("{} predictions for {} labels", predicted.len(), truth.len()),
        ));
    }
    let mut m = vec![vec![0; classes]; classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        let label = p.max(t);
        if label >= classes {
            return Err(Error::Label { label, classes });
        }
        m[t][p] += 1;
    }
    Ok(m)
}

pub fn classification_report(
    predicted: &[usize],
    truth: &[usize],
    classes: &[String],
) -> Result<MetricsReport> {
    if truth.is_empty() {
        return Err(Error::Insufficient("empty evaluation split".into()));
    }
    let k = classes.len();
    let confusion = confusion_matrix(predicted, truth, k)?;
    let trace: usize = (0..k).map(|i| confusion[i][i]).sum();
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let recall = (0..k)
        .map(|i| ratio(confusion[i][i], confusion[i].iter().sum()))
        .collect();
    let precision = (0..k)
        .map(|j| ratio(confusion[j][j], (0..k).map(|i| confusion[i][j]).sum()))
        .collect();
    Ok(MetricsReport {
        classes: classes.to_vec(),
        accuracy: Some(ratio(trace, truth.len())),
        precision,
        recall,
        confusion,
        ..MetricsReport::empty(Task::Classification, truth.len())
    })
}

/// MAE of the predictions and of the zero correction.
pub fn regression_report(predicted: &[f64], truth: &[f64]) -> Result<MetricsReport> {
    if truth.is_empty() {
        return Err(Error::Insufficient("empty evaluation split".into()));
    }
    if predicted.len() != truth.len() {
        return Err(Error::shape(
            "regression_report",
            format!("{} predictions for {} labels", predicted.len(), truth.len()),
        ));
    }
    let n = truth.len() as f64;
    let mae = predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / n;
    let before = truth.iter().map(|t| t.abs()).sum::<f64>() / n;
    Ok(MetricsReport {
        mae_mm: Some(mae),
        mae_before_mm: Some(before),
        ..MetricsReport::empty(Task::Regression, truth.len())
    })
}

/// Eval-mode accuracy, per-class precision/recall and confusion on `records`.
pub fn evaluate_classification(
    model: &Model,
    records: &[SignalRecord],
    batch_size: usize,
) -> Result<MetricsReport> {
    let HeadKind::Classification { .. } = model.head else {
        return Err(Error::Config(format!(
            "evaluate_classification on a {} head",
            model.head.prefix()
        )));
    };
    let truth = records
        .iter()
        .map(|r| {
            class_target(r).ok_or_else(|| Error::LabelFamily {
                expected: "classification".into(),
                found: "unlabeled".into(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&SignalRecord> = records.iter().collect();
    let predicted: Vec<usize> = model
        .infer(&refs, batch_size)?
        .iter()
        .map(|l| argmax(l))
        .collect();
    let mut report = classification_report(&predicted, &truth, &model.classes)?;
    report.param_count = Some(model.params.scalar_count(|_| true));
    Ok(report)
}

/// Eval-mode ranging MAE against the uncorrected baseline.
pub fn evaluate_regression(
    model: &Model,
    records: &[SignalRecord],
    batch_size: usize,
) -> Result<MetricsReport> {
    if model.head != HeadKind::Regression {
        return Err(Error::Config(format!(
            "evaluate_regression on a {} head",
            model.head.prefix()
        )));
    }
    let truth = records
        .iter()
        .map(|r| r.ranging_error_mm.map(f64::from))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::LabelFamily {
            expected: "ranging".into(),
            found: "classification".into(),
        })?;
    let refs: Vec<&SignalRecord> = records.iter().collect();
    let predicted: Vec<f64> = model
        .infer(&refs, batch_size)?
        .iter()
        .map(|v| v[0] as f64)
        .collect();
    let mut report = regression_report(&predicted, &truth)?;
    report.param_count = Some(model.params.scalar_count(|_| true));
    Ok(report)
}
