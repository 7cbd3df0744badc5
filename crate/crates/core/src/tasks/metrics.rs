//! Classification metrics.

use crate::error::{CoreError, Result};

/// Support-weighted F1: sum_i (N_i / N) * F1_i with
/// F1_i = 2 P_i R_i / (P_i + R_i).
///
/// Conventions: precision or recall with a zero denominator counts as 0, and
/// a class with P_i + R_i = 0 contributes F1_i = 0. Classes are 0..=max over
/// labels and predictions; classes with zero support carry zero weight.
pub fn weighted_f1(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != labels.len() {
        return Err(CoreError::Config(format!(
            "weighted_f1: {} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let num_classes = predictions
        .iter()
        .chain(labels)
        .max()
        .map_or(0, |m| m + 1);
    let n = labels.len() as f64;
    let mut score = 0.0;
    for class in 0..num_classes {
        let support = labels.iter().filter(|&&y| y == class).count();
        if support == 0 {
            continue;
        }
        let tp = predictions
            .iter()
            .zip(labels)
            .filter(|(p, y)| **p == class && **y == class)
            .count() as f64;
        let predicted = predictions.iter().filter(|&&p| p == class).count() as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = tp / support as f64;
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        score += support as f64 / n * f1;
    }
    Ok(score)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Expand a binary confusion matrix into prediction/label vectors.
    fn expand(tp: usize, fn_: usize, fp: usize, tn: usize) -> (Vec<usize>, Vec<usize>) {
        let mut preds = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..tp {
            preds.push(1);
            labels.push(1);
        }
        for _ in 0..fn_ {
            preds.push(0);
            labels.push(1);
        }
        for _ in 0..fp {
            preds.push(1);
            labels.push(0);
        }
        for _ in 0..tn {
            preds.push(0);
            labels.push(0);
        }
        (preds, labels)
    }

    #[test]
    fn perfect_predictions() {
        let labels = vec![0, 1, 1, 0, 1, 0, 0, 1];
        assert_eq!(weighted_f1(&labels, &labels).unwrap(), 1.0);
    }

    #[test]
    fn hand_confusion_matrix() {
        // TP=40, FN=10, FP=20, TN=30.
        // Class 1: precision 40/60, recall 40/50 -> F1 = 8/11.
        // Class 0: precision 30/40, recall 30/50 -> F1 = 2/3.
        // Weighted with 50/50 supports: 0.5*8/11 + 0.5*2/3 = 23/33.
        let (preds, labels) = expand(40, 10, 20, 30);
        let got = weighted_f1(&preds, &labels).unwrap();
        assert!((got - 23.0 / 33.0).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn all_one_class_prediction_on_balanced_labels() {
        // Everything predicted positive on a 50/50 set: F1 of the predicted
        // class is 2/3 and the other class contributes 0, so the weighted
        // score is half the majority-class F1.
        let (preds, labels) = expand(50, 0, 50, 0);
        let got = weighted_f1(&preds, &labels).unwrap();
        let majority_f1 = 2.0 * 0.5 * 1.0 / 1.5;
        assert!((got - 0.5 * majority_f1).abs() < 1e-12);
    }

    #[test]
    fn permutation_invariant() {
        let (mut preds, mut labels) = expand(13, 7, 5, 25);
        let before = weighted_f1(&preds, &labels).unwrap();
        // Rotate the sample order.
        preds.rotate_left(11);
        labels.rotate_left(11);
        let after = weighted_f1(&preds, &labels).unwrap();
        assert!((before - after).abs() < 1e-15);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(weighted_f1(&[], &[]).is_err());
        assert!(weighted_f1(&[0], &[]).is_err());
    }

    #[test]
    fn multiclass_basic() {
        // 3 classes; class 2 never predicted.
        let labels = vec![0, 0, 1, 1, 2, 2];
        let preds = vec![0, 1, 1, 1, 0, 0];
        // class 0: tp=1, predicted=3, support=2 -> P=1/3, R=1/2, F1=2/5.
        // class 1: tp=2, predicted=3, support=2 -> P=2/3, R=1, F1=4/5.
        // class 2: tp=0 -> F1=0.
        let want = (2.0 / 6.0) * 0.4 + (2.0 / 6.0) * 0.8;
        let got = weighted_f1(&preds, &labels).unwrap();
        assert!((got - want).abs() < 1e-12);
    }
}
