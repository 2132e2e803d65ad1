//! Probability-averaging ensembles and exhaustive subset search.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::label::{Emotion, NUM_CLASSES};
use crate::proba::{argmax, ProbabilityMatrix};

/// Largest pool [`search_best_subset`] accepts.
pub const MAX_MEMBERS: usize = 20;

fn check_aligned(members: &[&ProbabilityMatrix]) -> Result<usize> {
    let first = members.first().ok_or(Error::Empty("ensemble member list"))?;
    let rows = first.rows();
    for m in members {
        if m.rows() != rows {
            return Err(invalid(format!(
                "member `{}` has {} rows, `{}` has {rows}",
                m.id,
                m.rows(),
                first.id
            )));
        }
    }
    Ok(rows)
}

/// Cell-wise mean, summed in member order and divided by the member count.
pub fn average_probs(members: &[&ProbabilityMatrix]) -> Result<ProbabilityMatrix> {
    check_aligned(members)?;
    let mut acc = members[0].data().to_vec();
    for m in &members[1..] {
        for (a, &p) in acc.iter_mut().zip(m.data()) {
            *a += p;
        }
    }
    let k = members.len() as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    let id = members.iter().map(|m| m.id.as_str()).collect::<Vec<_>>().join("+");
    ProbabilityMatrix::new(id, acc)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetResult {
    /// Bit `i` set when member `i` is included.
    pub mask: u64,
    pub correct: usize,
    pub accuracy: f64,
    pub size: usize,
}

impl SubsetResult {
    pub fn members(&self) -> Vec<usize> {
        (0..64).filter(|i| self.mask >> i & 1 == 1).collect()
    }
}

/// Predictions of the averaged subset without materializing the matrix.
fn subset_correct(members: &[&ProbabilityMatrix], gold: &[usize], mask: u64) -> usize {
    let chosen: Vec<&ProbabilityMatrix> = members
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, m)| *m)
        .collect();
    let k = chosen.len() as f64;
    let mut row = [0.0f64; NUM_CLASSES];
    let mut correct = 0;
    for (r, &g) in gold.iter().enumerate() {
        row.copy_from_slice(chosen[0].row(r));
        for m in &chosen[1..] {
            for (a, &p) in row.iter_mut().zip(m.row(r)) {
                *a += p;
            }
        }
        row.iter_mut().for_each(|a| *a /= k);
        if argmax(&row) == g {
            correct += 1;
        }
    }
    correct
}

/// Scores every non-empty subset of `members` against `gold`. Sorted by
/// accuracy (descending), then size, then mask.
pub fn search_best_subset(members: &[&ProbabilityMatrix], gold: &[Emotion]) -> Result<Vec<SubsetResult>> {
    let rows = check_aligned(members)?;
    if members.len() > MAX_MEMBERS {
        return Err(invalid(format!(
            "exhaustive search supports at most {MAX_MEMBERS} members, got {}",
            members.len()
        )));
    }
    if gold.len() != rows {
        return Err(invalid(format!("{} gold labels for {rows} rows", gold.len())));
    }
    if rows == 0 {
        return Err(Error::Empty("evaluation set"));
    }
    let gold: Vec<usize> = gold.iter().map(|g| g.index()).collect();
    let n = members.len();
    let mut results: Vec<SubsetResult> = (1u64..1 << n)
        .into_par_iter()
        .map(|mask| {
            let correct = subset_correct(members, &gold, mask);
            SubsetResult {
                mask,
                correct,
                accuracy: correct as f64 / rows as f64,
                size: mask.count_ones() as usize,
            }
        })
        .collect();
    results.sort_by(|a, b| {
        b.correct
            .cmp(&a.correct)
            .then(a.size.cmp(&b.size))
            .then(a.mask.cmp(&b.mask))
    });
    Ok(results)
}

/// Best and mean accuracy per ensemble size `1..=n`.
pub fn accuracy_by_size(results: &[SubsetResult], n: usize) -> Vec<(usize, f64, f64)> {
    (1..=n)
        .map(|k| {
            let of_size: Vec<f64> = results.iter().filter(|r| r.size == k).map(|r| r.accuracy).collect();
            let best = of_size.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mean = of_size.iter().sum::<f64>() / of_size.len().max(1) as f64;
            (k, best, mean)
        })
        .collect()
}
