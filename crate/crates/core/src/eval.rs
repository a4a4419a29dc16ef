//! Confusion matrices, per-label precision/recall/F1, accuracy, and
//! one-vs-rest ROC curves with trapezoidal AUC.
//!
//! 0/0 metrics are an explicit `None` (rendered as an em dash), never 0 or
//! NaN.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::ingest::LabelDictionary;

/// Argmax with ties resolving to the lowest index.
pub fn scores_to_prediction(scores: &[f64]) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::Argument("empty score vector".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Argument("score vector contains NaN".into()));
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub n_labels: usize,
    /// `counts[i][j]`: rows with true label `i` predicted as `j`.
    pub counts: Vec<Vec<usize>>,
}

pub fn confusion_matrix(
    truth: &[usize],
    predicted: &[usize],
    n_labels: usize,
) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::Argument(format!(
            "truth has {} entries, predictions {}",
            truth.len(),
            predicted.len()
        )));
    }
    let mut counts = vec![vec![0usize; n_labels]; n_labels];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= n_labels || p >= n_labels {
            return Err(Error::Argument(format!(
                "label out of range: true {t}, predicted {p}, n_labels {n_labels}"
            )));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { n_labels, counts })
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().map(|row| row.iter().sum::<usize>()).sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.n_labels).map(|i| self.counts[i][i]).sum()
    }
}

/// `trace / total`; empty matrices have no accuracy.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Argument("accuracy undefined on an empty matrix".into()));
    }
    Ok(cm.trace() as f64 / total as f64)
}

/// Fraction of rows carrying the most frequent true label; the honesty floor
/// for accuracy on imbalanced data.
pub fn majority_baseline(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Argument("baseline undefined on an empty matrix".into()));
    }
    let max_support = cm
        .counts
        .iter()
        .map(|row| row.iter().sum::<usize>())
        .max()
        .unwrap_or(0);
    Ok(max_support as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub support: usize,
}

pub fn class_metrics(cm: &ConfusionMatrix, label: usize) -> Result<ClassMetrics> {
    if label >= cm.n_labels {
        return Err(Error::Argument(format!(
            "label {label} out of range for {} labels",
            cm.n_labels
        )));
    }
    let tp = cm.counts[label][label];
    let fp: usize = (0..cm.n_labels)
        .filter(|&i| i != label)
        .map(|i| cm.counts[i][label])
        .sum();
    let fn_: usize = (0..cm.n_labels)
        .filter(|&j| j != label)
        .map(|j| cm.counts[label][j])
        .sum();
    let ratio = |num: usize, den: usize| -> Option<f64> {
        if den == 0 {
            None
        } else {
            Some(num as f64 / den as f64)
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Ok(ClassMetrics {
        label,
        precision,
        recall,
        f1,
        support: tp + fn_,
    })
}

/// One-vs-rest ROC curve from binary truth plus scores. Points run from
/// (0,0) to (1,1); tied scores move the curve in a single step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub label: usize,
    /// `(fpr, tpr)` pairs aligned with `thresholds`.
    pub points: Vec<(f64, f64)>,
    /// Score cutoffs; the (0,0) anchor carries +infinity.
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

pub fn roc_curve(truth: &[bool], scores: &[f64]) -> Result<RocCurve> {
    if truth.len() != scores.len() {
        return Err(Error::Argument("truth and scores differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Argument("ROC scores contain NaN".into()));
    }
    let positives = truth.iter().filter(|&&t| t).count();
    let negatives = truth.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Argument(
            "degenerate ROC: need at least one positive and one negative".into(),
        ));
    }
    let mut order: Vec<usize> = (0..truth.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            if truth[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
        thresholds.push(score);
    }
    let mut curve = RocCurve {
        label: 0,
        points,
        thresholds,
        auc: 0.0,
    };
    curve.auc = auc(&curve);
    Ok(curve)
}

/// Trapezoidal area under the (fpr, tpr) polyline; equals the tie-aware
/// pair statistic `P(s_pos > s_neg) + P(s_pos = s_neg)/2`.
pub fn auc(curve: &RocCurve) -> f64 {
    let mut area = 0.0;
    for pair in curve.points.windows(2) {
        let (x0, y0) = pair[0];
        let (x1, y1) = pair[1];
        area += (x1 - x0) * (y0 + y1) / 2.0;
    }
    area
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: String,
    pub dataset: String,
}

/// Per-label row of the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub name: String,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub support: usize,
    pub auc: Option<f64>,
}

/// The JSON-serializable evaluation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub labels: Vec<LabelReport>,
    pub confusion: Vec<Vec<usize>>,
    pub provenance: Provenance,
}

/// Full evaluation: the report plus the per-label curves backing the AUC
/// column (None where the split lacks positives or negatives).
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: EvalReport,
    pub curves: Vec<Option<RocCurve>>,
}

/// Score every row (argmax prediction), assemble the confusion matrix,
/// per-label metrics, and one-vs-rest ROC curves.
pub fn build_report(
    truth: &[usize],
    scores: &[Vec<f64>],
    dict: &LabelDictionary,
    provenance: Provenance,
) -> Result<Evaluation> {
    if truth.len() != scores.len() {
        return Err(Error::Argument("truth and score matrix differ in length".into()));
    }
    let n_labels = dict.len();
    for row in scores {
        if row.len() != n_labels {
            return Err(Error::Argument(format!(
                "score row has {} entries, expected {n_labels}",
                row.len()
            )));
        }
    }
    let predictions = scores
        .iter()
        .map(|row| scores_to_prediction(row))
        .collect::<Result<Vec<_>>>()?;
    let cm = confusion_matrix(truth, &predictions, n_labels)?;
    let acc = accuracy(&cm)?;

    let curves: Vec<Option<RocCurve>> = exec::map_indexed(n_labels, |label| {
        let binary: Vec<bool> = truth.iter().map(|&t| t == label).collect();
        let label_scores: Vec<f64> = scores.iter().map(|row| row[label]).collect();
        roc_curve(&binary, &label_scores).ok().map(|mut c| {
            c.label = label;
            c
        })
    });

    let mut labels = Vec::with_capacity(n_labels);
    for label in 0..n_labels {
        let metrics = class_metrics(&cm, label)?;
        labels.push(LabelReport {
            name: dict.name_of(label).to_string(),
            precision: metrics.precision,
            recall: metrics.recall,
            f1: metrics.f1,
            support: metrics.support,
            auc: curves[label].as_ref().map(|c| c.auc),
        });
    }
    Ok(Evaluation {
        report: EvalReport {
            accuracy: acc,
            labels,
            confusion: cm.counts,
            provenance,
        },
        curves,
    })
}

/// ROC points as CSV rows `label,threshold,fpr,tpr` for plotting.
pub fn write_roc_csv<W: Write>(evaluation: &Evaluation, mut w: W) -> Result<()> {
    writeln!(w, "label,threshold,fpr,tpr").map_err(|e| Error::io("<roc csv>", e))?;
    for (label, curve) in evaluation.curves.iter().enumerate() {
        let Some(curve) = curve else { continue };
        let name = &evaluation.report.labels[label].name;
        for (point, threshold) in curve.points.iter().zip(&curve.thresholds) {
            writeln!(w, "{name},{threshold},{},{}", point.0, point.1)
                .map_err(|e| Error::io("<roc csv>", e))?;
        }
    }
    Ok(())
}

fn percent(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{:.2}", v * 100.0),
        None => "—".to_string(),
    }
}

/// Render accuracy, the majority-label baseline, and a per-label
/// precision/recall/F1/AUC table.
pub fn format_report_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let cm = ConfusionMatrix {
        n_labels: report.labels.len(),
        counts: report.confusion.clone(),
    };
    out.push_str(&format!("accuracy: {:.4}%\n", report.accuracy * 100.0));
    if let Ok(base) = majority_baseline(&cm) {
        out.push_str(&format!("majority-label baseline: {:.4}%\n", base * 100.0));
    }
    out.push_str(&format!(
        "{:<16} {:>10} {:>10} {:>10} {:>10} {:>8}\n",
        "label", "precision", "recall", "f1", "auc", "support"
    ));
    for label in &report.labels {
        out.push_str(&format!(
            "{:<16} {:>10} {:>10} {:>10} {:>10} {:>8}\n",
            label.name,
            percent(label.precision),
            percent(label.recall),
            percent(label.f1),
            percent(label.auc),
            label.support
        ));
    }
    out
}
