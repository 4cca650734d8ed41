//! Macro-averaged quality criteria computed from a confusion matrix.

use crate::data::ClassLabel;
use crate::error::{Error, Result};

/// `M × M` counts, rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionAccumulator {
    classes: usize,
    counts: Vec<u64>,
}

#[derive(Debug, Clone, Copy)]
struct ClassCounts {
    tp: u64,
    fp: u64,
    fn_: u64,
    tn: u64,
}

impl ConfusionAccumulator {
    pub fn new(classes: usize) -> Self {
        ConfusionAccumulator {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    /// Builds an accumulator from a row-major `M × M` matrix.
    pub fn from_counts(rows: &[Vec<u64>]) -> Result<Self> {
        let m = rows.len();
        if m == 0 || rows.iter().any(|r| r.len() != m) {
            return Err(Error::DegenerateDimensions(
                "confusion matrix must be square and non-empty".into(),
            ));
        }
        Ok(ConfusionAccumulator {
            classes: m,
            counts: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn record(&mut self, truth: ClassLabel, predicted: ClassLabel) {
        self.counts[truth.index() * self.classes + predicted.index()] += 1;
    }

    pub fn count(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    pub fn merge(&mut self, other: &ConfusionAccumulator) {
        assert_eq!(self.classes, other.classes, "class count mismatch");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    fn class_counts(&self, i: usize) -> ClassCounts {
        let m = self.classes;
        let tp = self.count(i, i);
        let row: u64 = (0..m).map(|p| self.count(i, p)).sum();
        let col: u64 = (0..m).map(|t| self.count(t, i)).sum();
        let fn_ = row - tp;
        let fp = col - tp;
        ClassCounts {
            tp,
            fp,
            fn_,
            tn: self.total() - tp - fp - fn_,
        }
    }

    fn non_empty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyAccumulator)
        } else {
            Ok(())
        }
    }
}

/// Ratio `num / den` where an empty denominator counts as 0 for a class that
/// never occurs (neither true nor predicted) and as 1 otherwise.
fn guarded_ratio(num: u64, den: u64, c: ClassCounts) -> f64 {
    if den > 0 {
        num as f64 / den as f64
    } else if c.tp + c.fp + c.fn_ == 0 {
        0.0
    } else {
        1.0
    }
}

fn macro_mean(acc: &ConfusionAccumulator, f: impl Fn(ClassCounts) -> f64) -> Result<f64> {
    acc.non_empty()?;
    let sum: f64 = (0..acc.classes).map(|i| f(acc.class_counts(i))).sum();
    Ok(sum / acc.classes as f64)
}

pub fn macro_fdr(acc: &ConfusionAccumulator) -> Result<f64> {
    macro_mean(acc, |c| guarded_ratio(c.fp, c.fp + c.tp, c))
}

pub fn macro_fnr(acc: &ConfusionAccumulator) -> Result<f64> {
    macro_mean(acc, |c| guarded_ratio(c.fn_, c.fn_ + c.tp, c))
}

fn binary_mcc(c: ClassCounts) -> f64 {
    let (tp, fp, fn_, tn) = (c.tp as f64, c.fp as f64, c.fn_ as f64, c.tn as f64);
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if den == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / den.sqrt()
    }
}

/// `(1 - mean one-vs-rest MCC) / 2`: 0 is perfect, 1 is the worst.
pub fn macro_mcc_loss(acc: &ConfusionAccumulator) -> Result<f64> {
    let mcc = macro_mean(acc, binary_mcc)?;
    Ok(((1.0 - mcc) / 2.0).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn acc(rows: &[&[u64]]) -> ConfusionAccumulator {
        ConfusionAccumulator::from_counts(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
            .unwrap()
    }

    #[test]
    fn diagonal_is_perfect() {
        let a = acc(&[&[5, 0, 0], &[0, 7, 0], &[0, 0, 2]]);
        assert_eq!(macro_fdr(&a).unwrap(), 0.0);
        assert_eq!(macro_fnr(&a).unwrap(), 0.0);
        assert_eq!(macro_mcc_loss(&a).unwrap(), 0.0);
    }

    #[test]
    fn two_class_counts() {
        // TP1=8, FN1=2, FP1=3, TN1=7
        let a = acc(&[&[8, 2], &[3, 7]]);
        // brute-force per-class formulas
        let fdr1 = 3.0 / (3.0 + 8.0);
        let fdr2 = 2.0 / (2.0 + 7.0);
        let fnr1 = 2.0 / (2.0 + 8.0);
        let fnr2 = 3.0 / (3.0 + 7.0);
        assert!((macro_fdr(&a).unwrap() - (fdr1 + fdr2) / 2.0).abs() < 1e-15);
        assert!((macro_fdr(&a).unwrap() - (3.0 / 11.0 + 2.0 / 9.0) / 2.0).abs() < 1e-15);
        assert!((macro_fnr(&a).unwrap() - (fnr1 + fnr2) / 2.0).abs() < 1e-15);
        assert!((macro_fnr(&a).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn absent_class_contributes_zero() {
        let a = acc(&[&[4, 1, 0], &[2, 3, 0], &[0, 0, 0]]);
        let two = acc(&[&[4, 1], &[2, 3]]);
        let scale = 2.0 / 3.0;
        assert!((macro_fdr(&a).unwrap() - scale * macro_fdr(&two).unwrap()).abs() < 1e-15);
        assert!((macro_fnr(&a).unwrap() - scale * macro_fnr(&two).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn never_predicted_class_counts_as_worst() {
        // constant-class predictor on a balanced chunk
        let a = acc(&[&[10, 0], &[10, 0]]);
        assert_eq!(macro_fnr(&a).unwrap(), 0.5);
        // class 2 is never predicted: FDR2 = 1, FDR1 = 0.5
        assert_eq!(macro_fdr(&a).unwrap(), 0.75);
        assert_eq!(macro_mcc_loss(&a).unwrap(), 0.5);
    }

    #[test]
    fn mcc_anchors() {
        let inverted = acc(&[&[0, 9], &[6, 0]]);
        assert!((macro_mcc_loss(&inverted).unwrap() - 1.0).abs() < 1e-15);
        let a = acc(&[&[20, 10], &[10, 20]]);
        assert!((macro_mcc_loss(&a).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_accumulator_errors() {
        let a = ConfusionAccumulator::new(3);
        assert!(matches!(macro_fdr(&a), Err(Error::EmptyAccumulator)));
        assert!(matches!(macro_fnr(&a), Err(Error::EmptyAccumulator)));
        assert!(matches!(macro_mcc_loss(&a), Err(Error::EmptyAccumulator)));
    }

    #[test]
    fn record_and_merge() {
        let mut a = ConfusionAccumulator::new(2);
        a.record(ClassLabel::from_index(0), ClassLabel::from_index(1));
        let mut b = a.clone();
        b.record(ClassLabel::from_index(1), ClassLabel::from_index(1));
        a.merge(&b);
        assert_eq!(a.total(), 3);
        assert_eq!(a.count(0, 1), 2);
        assert_eq!(a.count(1, 1), 1);
    }

    proptest! {
        #[test]
        fn metrics_in_unit_interval_and_positive_off_diagonal(
            m in 2usize..5,
            cells in proptest::collection::vec(0u64..20, 16),
            off in 1u64..5,
        ) {
            let mut rows: Vec<Vec<u64>> = (0..m).map(|i| cells[i * 4..i * 4 + m].to_vec()).collect();
            for v in [macro_fdr, macro_fnr, macro_mcc_loss] {
                if let Ok(a) = ConfusionAccumulator::from_counts(&rows) {
                    if !a.is_empty() {
                        let x = v(&a).unwrap();
                        prop_assert!((0.0..=1.0).contains(&x));
                    }
                }
            }
            rows[0][1] += off;
            let a = ConfusionAccumulator::from_counts(&rows).unwrap();
            prop_assert!(macro_fdr(&a).unwrap() > 0.0);
            prop_assert!(macro_fnr(&a).unwrap() > 0.0);
            prop_assert!(macro_mcc_loss(&a).unwrap() > 0.0);
        }
    }
}
