use serde::{Deserialize, Serialize};

use crate::corpus::Polarity;
use crate::error::{Error, Result};

const K: usize = Polarity::COUNT;

/// Accuracy and macro-F1 over the three polarity classes.
///
/// A class absent from both gold labels and predictions scores F1 = 0 and still
/// counts toward the macro average.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub n_examples: usize,
    pub per_class_f1: [f64; K],
    /// `confusion[gold][predicted]`
    pub confusion: [[usize; K]; K],
}

pub fn compute_metrics(gold: &[Polarity], predicted: &[Polarity]) -> Result<Metrics> {
    if gold.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    if gold.len() != predicted.len() {
        return Err(Error::Data(format!("{} gold labels but {} predictions", gold.len(), predicted.len())));
    }
    let mut confusion = [[0usize; K]; K];
    for (g, p) in gold.iter().zip(predicted) {
        confusion[g.index()][p.index()] += 1;
    }
    let correct: usize = (0..K).map(|c| confusion[c][c]).sum();
    let mut per_class_f1 = [0.0; K];
    for (c, f1) in per_class_f1.iter_mut().enumerate() {
        let tp = confusion[c][c];
        let fp: usize = (0..K).filter(|&g| g != c).map(|g| confusion[g][c]).sum();
        let fn_: usize = (0..K).filter(|&p| p != c).map(|p| confusion[c][p]).sum();
        let denom = 2 * tp + fp + fn_;
        *f1 = if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 };
    }
    Ok(Metrics {
        accuracy: correct as f64 / gold.len() as f64,
        macro_f1: per_class_f1.iter().sum::<f64>() / K as f64,
        n_examples: gold.len(),
        per_class_f1,
        confusion,
    })
}
