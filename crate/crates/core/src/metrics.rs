//! Screening metrics; label 1 (abnormal) is the positive class.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequencePrediction {
    pub id: String,
    pub label: usize,
    pub predicted: usize,
    pub prob_abnormal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    /// True-positive rate; `None` without abnormal examples.
    pub sensitivity: Option<f64>,
    /// True-negative rate; `None` without normal examples.
    pub specificity: Option<f64>,
    pub true_positives: usize,
    pub true_negatives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub predictions: Vec<SequencePrediction>,
}

impl MetricsReport {
    pub fn from_predictions(predictions: Vec<SequencePrediction>) -> Self {
        let count = |label: usize, predicted: usize| {
            predictions
                .iter()
                .filter(|p| p.label == label && p.predicted == predicted)
                .count()
        };
        let (tp, tn, fp, fnn) = (count(1, 1), count(0, 0), count(0, 1), count(1, 0));
        let rate = |hit: usize, miss: usize| (hit + miss > 0).then(|| hit as f64 / (hit + miss) as f64);
        let total = predictions.len();
        MetricsReport {
            accuracy: if total == 0 { 0.0 } else { (tp + tn) as f64 / total as f64 },
            sensitivity: rate(tp, fnn),
            specificity: rate(tn, fp),
            true_positives: tp,
            true_negatives: tn,
            false_positives: fp,
            false_negatives: fnn,
            predictions,
        }
    }

    pub fn total(&self) -> usize {
        self.true_positives + self.true_negatives + self.false_positives + self.false_negatives
    }
}
