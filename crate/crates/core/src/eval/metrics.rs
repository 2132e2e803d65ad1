use serde::Serialize;

use crate::error::{invalid, Result};
use crate::label::{Emotion, NUM_CLASSES};

/// Confusion matrix (rows gold, columns predicted) and derived scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub classes: Vec<String>,
    pub confusion: Vec<Vec<usize>>,
    pub support: Vec<usize>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub total: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean; 0 when both inputs are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Metrics over `n` classes numbered `0..n`. Zero divisions score 0.
pub fn metrics_from_indices(gold: &[usize], predicted: &[usize], names: &[String]) -> Result<MetricsReport> {
    let n = names.len();
    if gold.len() != predicted.len() {
        return Err(invalid(format!(
            "{} gold labels but {} predictions",
            gold.len(),
            predicted.len()
        )));
    }
    if gold.is_empty() {
        return Err(crate::Error::Empty("label list"));
    }
    let mut confusion = vec![vec![0usize; n]; n];
    for (&g, &p) in gold.iter().zip(predicted) {
        if g >= n || p >= n {
            return Err(invalid(format!("label index out of range for {n} classes")));
        }
        confusion[g][p] += 1;
    }
    let support: Vec<usize> = confusion.iter().map(|r| r.iter().sum()).collect();
    let predicted_pos: Vec<usize> = (0..n).map(|c| confusion.iter().map(|r| r[c]).sum()).collect();
    let precision: Vec<f64> = (0..n).map(|c| ratio(confusion[c][c], predicted_pos[c])).collect();
    let recall: Vec<f64> = (0..n).map(|c| ratio(confusion[c][c], support[c])).collect();
    let f1: Vec<f64> = precision.iter().zip(&recall).map(|(&p, &r)| f1_score(p, r)).collect();
    let trace: usize = (0..n).map(|c| confusion[c][c]).sum();
    Ok(MetricsReport {
        classes: names.to_vec(),
        macro_precision: mean(&precision),
        macro_recall: mean(&recall),
        macro_f1: mean(&f1),
        accuracy: ratio(trace, gold.len()),
        total: gold.len(),
        confusion,
        support,
        precision,
        recall,
        f1,
    })
}

pub fn compute_metrics(gold: &[Emotion], predicted: &[Emotion]) -> Result<MetricsReport> {
    let names: Vec<String> = Emotion::ALL.iter().map(|e| e.name().to_string()).collect();
    debug_assert_eq!(names.len(), NUM_CLASSES);
    let g: Vec<usize> = gold.iter().map(|e| e.index()).collect();
    let p: Vec<usize> = predicted.iter().map(|e| e.index()).collect();
    metrics_from_indices(&g, &p, &names)
}

pub fn accuracy(gold: &[Emotion], predicted: &[Emotion]) -> f64 {
    let hits = gold.iter().zip(predicted).filter(|(g, p)| g == p).count();
    ratio(hits, gold.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_class() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    #[test]
    fn hand_computed_two_class() {
        // confusion [[2,0],[1,1]]
        let r = metrics_from_indices(&[0, 0, 1, 1], &[0, 0, 0, 1], &two_class()).unwrap();
        assert_eq!(r.confusion, vec![vec![2, 0], vec![1, 1]]);
        assert!((r.f1[0] - 0.8).abs() < 1e-15);
        assert!((r.f1[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.macro_f1 - (0.8 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert!((r.macro_f1 - 0.7333).abs() < 1e-4);
        assert_eq!(r.accuracy, 0.75);
    }

    #[test]
    fn perfect_predictions() {
        let gold: Vec<Emotion> = (0..30).map(|i| Emotion::ALL[i % 6]).collect();
        let r = compute_metrics(&gold, &gold).unwrap();
        for c in 0..6 {
            assert_eq!(r.confusion[c][c], 5);
            assert_eq!(r.f1[c], 1.0);
        }
        assert_eq!(r.macro_f1, 1.0);
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn never_predicted_class_scores_zero() {
        let r = metrics_from_indices(&[0, 1], &[0, 0], &two_class()).unwrap();
        assert_eq!(r.precision[1], 0.0);
        assert_eq!(r.f1[1], 0.0);
        assert!(metrics_from_indices(&[0], &[0, 1], &two_class()).is_err());
        assert!(metrics_from_indices(&[0], &[2], &two_class()).is_err());
        assert!(metrics_from_indices(&[], &[], &two_class()).is_err());
    }

    proptest! {
        #[test]
        fn counting_identities(pairs in prop::collection::vec((0usize..6, 0usize..6), 1..200), shift in 1usize..6) {
            let gold: Vec<Emotion> = pairs.iter().map(|p| Emotion::ALL[p.0]).collect();
            let pred: Vec<Emotion> = pairs.iter().map(|p| Emotion::ALL[p.1]).collect();
            let r = compute_metrics(&gold, &pred).unwrap();
            prop_assert_eq!(r.accuracy, accuracy(&gold, &pred));
            for c in 0..6 {
                prop_assert_eq!(r.support[c], gold.iter().filter(|g| g.index() == c).count());
                let tp = r.confusion[c][c] as f64;
                let pp = pred.iter().filter(|p| p.index() == c).count() as f64;
                if pp > 0.0 { prop_assert!((r.precision[c] * pp - tp).abs() < 1e-9); }
                if r.support[c] > 0 { prop_assert!((r.recall[c] * r.support[c] as f64 - tp).abs() < 1e-9); }
            }
            let perm = |e: &Emotion| Emotion::ALL[(e.index() + shift) % 6];
            let rg: Vec<Emotion> = gold.iter().map(perm).collect();
            let rp: Vec<Emotion> = pred.iter().map(perm).collect();
            let relabeled = compute_metrics(&rg, &rp).unwrap();
            prop_assert!((relabeled.macro_f1 - r.macro_f1).abs() < 1e-12);
        }
    }
}
