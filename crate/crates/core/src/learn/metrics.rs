use serde::{Deserialize, Serialize};

use crate::error::{KerrError, Result};

/// Binary classification metrics with `+1` as the positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `[[TN, FP], [FN, TP]]`.
    pub confusion: [[usize; 2]; 2],
}

impl Metrics {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Undefined precision or recall (empty denominator) is reported as 0.
pub fn evaluate(predictions: &[i8], truth: &[i8]) -> Result<Metrics> {
    if predictions.is_empty() {
        return Err(KerrError::InvalidInput("cannot evaluate an empty prediction set".into()));
    }
    if predictions.len() != truth.len() {
        return Err(KerrError::ShapeMismatch(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    let mut cm = [[0usize; 2]; 2];
    for (&p, &t) in predictions.iter().zip(truth) {
        let row = usize::from(t > 0);
        let col = usize::from(p > 0);
        cm[row][col] += 1;
    }
    let [[tn, fp], [fn_, tp]] = cm;
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Metrics {
        accuracy: ratio(tp + tn, predictions.len()),
        precision,
        recall,
        f1,
        confusion: cm,
    })
}
