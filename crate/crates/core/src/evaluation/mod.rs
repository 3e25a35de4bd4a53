//! Validation protocol and precision measures.

mod grid;
mod protocol;
mod synthetic;

use serde::Serialize;

use crate::error::{Error, Result};

pub use grid::{
    run_experiment_grid, CellResult, FeatureKind, FittedModel, GridConfig, GridResult, LogisticSummary, Method,
    SplitSummary,
};
pub use protocol::{downsample, split, ClassCounts, Partition};
pub use synthetic::{generate_synthetic, SyntheticData, SyntheticSignal};

/// Confusion counts with bankrupt as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(truth: &[bool], predicted: &[bool]) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch(truth.len(), predicted.len()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t, p) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Percentages. A measure whose denominator class is absent is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub balanced_accuracy: Option<f64>,
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InsufficientData("empty confusion matrix".into()));
    }
    let pct = |num: usize, den: usize| (den > 0).then(|| 100.0 * num as f64 / den as f64);
    let sensitivity = pct(cm.tp, cm.tp + cm.fn_);
    let specificity = pct(cm.tn, cm.tn + cm.fp);
    Ok(Metrics {
        accuracy: 100.0 * (cm.tp + cm.tn) as f64 / total as f64,
        sensitivity,
        specificity,
        balanced_accuracy: sensitivity.zip(specificity).map(|(a, b)| (a + b) / 2.0),
    })
}

/// Precision measures of one method on one feature set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub method: Method,
    pub features: FeatureKind,
    pub confusion: ConfusionMatrix,
    #[serde(flatten)]
    pub metrics: Metrics,
}

impl MetricsReport {
    pub fn label(&self) -> String {
        format!("{} ({})", self.method.title(), self.features.name())
    }
}

/// Aligned text table: method, accuracy, sensitivity, specificity, balanced accuracy.
pub fn render_metrics_table(reports: &[MetricsReport]) -> String {
    use std::fmt::Write as _;
    let width = reports
        .iter()
        .map(|r| r.label().len())
        .max()
        .unwrap_or(0)
        .max("Prediction method".len());
    let cell = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.0} %"));
    let mut out = format!(
        "{:<width$}  {:>8}  {:>11}  {:>11}  {:>17}\n",
        "Prediction method", "Accuracy", "Sensitivity", "Specificity", "Balanced accuracy"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<width$}  {:>8}  {:>11}  {:>11}  {:>17}",
            r.label(),
            cell(Some(r.metrics.accuracy)),
            cell(r.metrics.sensitivity),
            cell(r.metrics.specificity),
            cell(r.metrics.balanced_accuracy)
        );
    }
    out
}
