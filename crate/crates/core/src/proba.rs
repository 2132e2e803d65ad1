use crate::error::{invalid, Result};
use crate::label::{Emotion, NUM_CLASSES};
use crate::tokenizer::Token;

/// One model's class probabilities, `[examples × 6]`, rows summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    pub id: String,
    data: Vec<f64>,
}

pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

impl ProbabilityMatrix {
    /// Checks that every entry lies in `[0, 1]` and rows sum to 1 ± 1e-6.
    pub fn new(id: impl Into<String>, data: Vec<f64>) -> Result<Self> {
        if data.is_empty() || data.len() % NUM_CLASSES != 0 {
            return Err(invalid(format!(
                "probability data length {} is not a positive multiple of {NUM_CLASSES}",
                data.len()
            )));
        }
        for (r, row) in data.chunks(NUM_CLASSES).enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(invalid(format!("row {r} has an entry outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(invalid(format!("row {r} sums to {s}")));
            }
        }
        Ok(ProbabilityMatrix { id: id.into(), data })
    }

    pub fn rows(&self) -> usize {
        self.data.len() / NUM_CLASSES
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * NUM_CLASSES..(r + 1) * NUM_CLASSES]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn predictions(&self) -> Vec<Emotion> {
        self.data
            .chunks(NUM_CLASSES)
            .map(|r| Emotion::from_index(argmax(r)).expect("six columns"))
            .collect()
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Anything that maps token sequences to class probabilities.
pub trait Classifier {
    fn predict_proba(&self, docs: &[Vec<Token>]) -> Result<ProbabilityMatrix>;

    fn predict(&self, docs: &[Vec<Token>]) -> Result<Vec<Emotion>> {
        Ok(self.predict_proba(docs)?.predictions())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_rows() {
        let ok = ProbabilityMatrix::new("m", vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(ok.rows(), 1);
        assert_eq!(ok.predictions(), vec![Emotion::Anger]);
        assert!(ProbabilityMatrix::new("m", vec![0.5; 6]).is_err());
        assert!(ProbabilityMatrix::new("m", vec![1.0; 5]).is_err());
        assert!(ProbabilityMatrix::new("m", vec![1.5, -0.5, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn argmax_tie_goes_low() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.3, 0.3]), 0);
    }
}
