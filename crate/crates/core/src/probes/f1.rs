use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data_io::Span;

/// Labeled bracketing precision, recall and F1 with the counts behind them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct F1Score {
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl F1Score {
    pub fn from_counts(matched: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        F1Score {
            matched,
            predicted,
            gold,
            precision: ratio(matched, predicted),
            recall: ratio(matched, gold),
            f1: ratio(2 * matched, predicted + gold),
        }
    }

    /// Micro-average: sums the counts of both scores.
    pub fn merge(&self, other: &F1Score) -> F1Score {
        F1Score::from_counts(
            self.matched + other.matched,
            self.predicted + other.predicted,
            self.gold + other.gold,
        )
    }
}

/// Exact `(start, end, label)` matches; repeated spans count once.
pub fn bracketing_f1(predicted: &[Span], gold: &[Span]) -> F1Score {
    let key = |s: &Span| (s.start, s.end, s.label.clone());
    let p: BTreeSet<_> = predicted.iter().map(key).collect();
    let g: BTreeSet<_> = gold.iter().map(key).collect();
    F1Score::from_counts(p.intersection(&g).count(), p.len(), g.len())
}
