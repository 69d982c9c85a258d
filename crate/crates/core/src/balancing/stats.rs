use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-class sample counts and their frequency proportions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptStats {
    counts: Vec<u64>,
    total: u64,
}

impl ConceptStats {
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::input("concept stats need at least one class"));
        }
        let total = counts.iter().sum();
        if total == 0 {
            return Err(Error::input("concept stats need a non-zero total"));
        }
        Ok(Self { counts, total })
    }

    pub fn from_labels(labels: &[usize], num_classes: usize) -> Result<Self> {
        let mut counts = vec![0u64; num_classes];
        for &l in labels {
            *counts
                .get_mut(l)
                .ok_or_else(|| Error::input(format!("label {l} outside {num_classes} classes")))? += 1;
        }
        Self::from_counts(counts)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    /// Frequency proportion of `class`.
    pub fn proportion(&self, class: usize) -> Result<f64> {
        let c = *self
            .counts
            .get(class)
            .ok_or_else(|| Error::input(format!("class {class} not in stats")))?;
        Ok(c as f64 / self.total as f64)
    }

    pub fn proportions(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.total as f64).collect()
    }

    /// Inverse-frequency weight against a uniform target: `(1 / n) / phi(class)`.
    pub fn freq_weight(&self, class: usize) -> Result<f64> {
        let phi = self.proportion(class)?;
        if phi == 0.0 {
            return Err(Error::input(format!("class {class} has no samples")));
        }
        Ok(1.0 / self.num_classes() as f64 / phi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_weights_are_one() {
        let s = ConceptStats::from_counts(vec![5000, 5000]).unwrap();
        assert_eq!(s.freq_weight(0).unwrap(), 1.0);
        assert_eq!(s.freq_weight(1).unwrap(), 1.0);
    }

    #[test]
    fn imbalanced_weights() {
        let s = ConceptStats::from_counts(vec![9900, 100]).unwrap();
        assert!((s.freq_weight(0).unwrap() - 0.5 / 0.99).abs() < 1e-12);
        assert!((s.freq_weight(0).unwrap() - 0.5051).abs() < 1e-4);
        assert!((s.freq_weight(1).unwrap() - 50.0).abs() < 1e-12);
        assert!((s.proportions().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unseen_class_is_input_error() {
        let s = ConceptStats::from_counts(vec![10, 0]).unwrap();
        assert!(matches!(s.freq_weight(1), Err(Error::Input(_))));
        assert!(matches!(s.freq_weight(2), Err(Error::Input(_))));
    }

    #[test]
    fn from_labels_counts() {
        let s = ConceptStats::from_labels(&[0, 1, 1, 2], 3).unwrap();
        assert_eq!(s.counts(), &[1, 2, 1]);
        assert_eq!(s.total(), 4);
        assert!(ConceptStats::from_labels(&[3], 3).is_err());
    }
}
