use serde::{Deserialize, Serialize};

use crate::bilm::ContextVectors;
use crate::data_io::Span;
use crate::error::{Error, Result};
use crate::tensor::NDArray;

/// `[h_s0; h_s1; h_s0 ⊙ h_s1; h_s0 − h_s1]`, dimension `4 × 2d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanRep {
    pub values: Vec<f64>,
}

impl SpanRep {
    pub fn from_endpoints(first: &[f64], last: &[f64]) -> Result<Self> {
        if first.len() != last.len() {
            return Err(Error::shape(
                "span_representation",
                format!("endpoint dims {} and {}", first.len(), last.len()),
            ));
        }
        let mut values = Vec::with_capacity(4 * first.len());
        values.extend_from_slice(first);
        values.extend_from_slice(last);
        values.extend(first.iter().zip(last).map(|(a, b)| a * b));
        values.extend(first.iter().zip(last).map(|(a, b)| a - b));
        Ok(SpanRep { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub fn span_representation(
    cv: &ContextVectors,
    layer: usize,
    s0: usize,
    s1: usize,
) -> Result<SpanRep> {
    check_span(cv.len(), s0, s1)?;
    let h = cv.layer(layer)?;
    SpanRep::from_endpoints(h.row_slice(s0), h.row_slice(s1))
}

pub(crate) fn check_span(n: usize, s0: usize, s1: usize) -> Result<()> {
    if s0 > s1 {
        return Err(Error::OutOfRange(format!("span start {s0} after end {s1}")));
    }
    if s1 >= n {
        return Err(Error::OutOfRange(format!("span end {s1} in sentence of {n}")));
    }
    Ok(())
}

/// Every span `(s0, s1)` with `s0 ≤ s1 < n`, ordered by start then end.
pub fn all_spans(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|s0| (s0..n).map(move |s1| (s0, s1))).collect()
}

/// Span representations of `spans` in one layer, one row each.
pub fn span_matrix(cv: &ContextVectors, layer: usize, spans: &[(usize, usize)]) -> Result<NDArray> {
    let rows = spans
        .iter()
        .map(|&(s0, s1)| span_representation(cv, layer, s0, s1).map(|r| r.values))
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(Error::Empty("spans"));
    }
    NDArray::from_rows(&rows)
}

/// Labeled span vectors packed as a pseudo-sentence for the vector dump:
/// each "token" is `LABEL:s0-s1` and the single layer holds the span
/// representations.
pub fn labeled_span_vectors(cv: &ContextVectors, layer: usize, spans: &[Span]) -> Result<ContextVectors> {
    let bounds: Vec<(usize, usize)> = spans.iter().map(|s| (s.start, s.end)).collect();
    let matrix = span_matrix(cv, layer, &bounds)?;
    let names = spans
        .iter()
        .map(|s| format!("{}:{}-{}", s.label, s.start, s.end))
        .collect();
    ContextVectors::new(names, vec![matrix])
}
