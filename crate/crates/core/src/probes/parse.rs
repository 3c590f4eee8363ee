use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::features::{stack_features, LayerSelection};
use super::f1::{bracketing_f1, F1Score};
use super::linear::{argmax, train_linear_probe, LinearProbe, ProbeConfig};
use super::span::{all_spans, span_matrix};
use crate::bilm::ContextVectors;
use crate::data_io::{crosses, Span, TreeSentence};
use crate::error::{Error, Result};
use crate::parallel::{self, Execution};
use crate::tensor::NDArray;

/// Label of spans that are not constituents.
pub const NULL_LABEL: &str = "NULL";

/// Label scores for every span of one sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct SpanScores {
    pub n: usize,
    /// `(s0, s1)` in the row order of `scores`.
    pub spans: Vec<(usize, usize)>,
    /// `[N(N+1)/2, C]`
    pub scores: NDArray,
    pub labels: Vec<String>,
    pub null: usize,
}

impl SpanScores {
    pub fn new(n: usize, scores: NDArray, labels: Vec<String>) -> Result<Self> {
        let spans = all_spans(n);
        if scores.rows() != spans.len() || scores.cols() != labels.len() {
            return Err(Error::shape(
                "span_scores",
                format!(
                    "{:?} scores for {} spans and {} labels",
                    scores.shape(),
                    spans.len(),
                    labels.len()
                ),
            ));
        }
        let null = labels
            .iter()
            .position(|l| l == NULL_LABEL)
            .ok_or_else(|| Error::Config(format!("span labels lack {NULL_LABEL}")))?;
        Ok(SpanScores {
            n,
            spans,
            scores,
            labels,
            null,
        })
    }

    /// Spans whose argmax label is not NULL, with that label id and the
    /// margin of its score over NULL.
    fn candidates(&self) -> Vec<Candidate> {
        (0..self.spans.len())
            .filter_map(|r| {
                let row = self.scores.row_slice(r);
                let best = argmax(row);
                (best != self.null).then(|| Candidate {
                    s0: self.spans[r].0,
                    s1: self.spans[r].1,
                    label: best,
                    score: row[best] - row[self.null],
                })
            })
            .collect()
    }

    fn to_spans(&self, chosen: &[Candidate]) -> Vec<Span> {
        let mut out: Vec<Span> = chosen
            .iter()
            .map(|c| Span::new(c.s0, c.s1, self.labels[c.label].clone()))
            .collect();
        out.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));
        out
    }
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    s0: usize,
    s1: usize,
    label: usize,
    score: f64,
}

impl Candidate {
    fn crosses(&self, other: &Candidate) -> bool {
        crosses(self.s0, self.s1, other.s0, other.s1)
    }

    fn rank(&self, other: &Candidate) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then(self.s0.cmp(&other.s0))
            .then((other.s1 - other.s0).cmp(&(self.s1 - self.s0)))
            .then(self.label.cmp(&other.label))
    }
}

/// Span features of every span of every sentence, one matrix per layer.
pub fn span_features(cvs: &[ContextVectors], selection: LayerSelection) -> Result<Vec<NDArray>> {
    stack_features(cvs, selection, |cv, layer| span_matrix(cv, layer, &all_spans(cv.len())))
}

/// Scores all `N(N+1)/2` spans of one sentence.
pub fn score_all_spans(
    cv: &ContextVectors,
    selection: LayerSelection,
    probe: &LinearProbe,
) -> Result<SpanScores> {
    let feats = span_features(std::slice::from_ref(cv), selection)?;
    let scores = probe.scores(&feats)?;
    SpanScores::new(cv.len(), scores, probe.labels.clone())
}

/// Trains a span-label probe: gold constituents carry their label, every
/// other span is NULL.
pub fn train_span_probe(
    trees: &[TreeSentence],
    cvs: &[ContextVectors],
    selection: LayerSelection,
    config: &ProbeConfig,
) -> Result<LinearProbe> {
    check_alignment(trees, cvs)?;
    let mut labels = Vec::new();
    for tree in trees {
        let gold: HashMap<(usize, usize), &str> = tree
            .spans
            .iter()
            .rev()
            .map(|s| ((s.start, s.end), s.label.as_str()))
            .collect();
        labels.extend(
            all_spans(tree.len())
                .into_iter()
                .map(|k| gold.get(&k).copied().unwrap_or(NULL_LABEL).to_string()),
        );
    }
    train_linear_probe(&span_features(cvs, selection)?, &labels, config)
}

fn check_alignment(trees: &[TreeSentence], cvs: &[ContextVectors]) -> Result<()> {
    if trees.len() != cvs.len() {
        return Err(Error::shape(
            "span_probe",
            format!("{} trees, {} context vectors", trees.len(), cvs.len()),
        ));
    }
    for (i, (t, cv)) in trees.iter().zip(cvs).enumerate() {
        if t.tokens != cv.tokens() {
            return Err(Error::shape(
                "span_probe",
                format!("tree {i} tokens differ from its vectors"),
            ));
        }
    }
    Ok(())
}

/// Greedy reconciliation: candidates are taken in descending margin order
/// (ties: earlier start, longer span, lower label id) and kept unless they
/// cross a span already kept.
pub fn decode_tree(scores: &SpanScores) -> Vec<Span> {
    let mut cands = scores.candidates();
    cands.sort_by(Candidate::rank);
    let mut kept: Vec<Candidate> = Vec::new();
    for c in cands {
        if !kept.iter().any(|k| k.crosses(&c)) {
            kept.push(c);
        }
    }
    scores.to_spans(&kept)
}

/// Non-crossing subset of the candidates with maximal total margin, found
/// by exhaustive search. Returns the spans and their total.
pub fn exhaustive_decode(scores: &SpanScores) -> (Vec<Span>, f64) {
    let mut cands = scores.candidates();
    cands.sort_by(Candidate::rank);
    let mut suffix = vec![0.0; cands.len() + 1];
    for i in (0..cands.len()).rev() {
        suffix[i] = suffix[i + 1] + cands[i].score.max(0.0);
    }
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    let mut current = Vec::new();
    search(&cands, &suffix, 0, &mut current, 0.0, &mut best);
    let chosen: Vec<Candidate> = best.0.iter().map(|&i| cands[i]).collect();
    (scores.to_spans(&chosen), best.1)
}

fn search(
    cands: &[Candidate],
    suffix: &[f64],
    i: usize,
    current: &mut Vec<usize>,
    total: f64,
    best: &mut (Vec<usize>, f64),
) {
    if i == cands.len() {
        if total > best.1 {
            *best = (current.clone(), total);
        }
        return;
    }
    if total + suffix[i] <= best.1 {
        return;
    }
    if !current.iter().any(|&k| cands[k].crosses(&cands[i])) {
        current.push(i);
        search(cands, suffix, i + 1, current, total + cands[i].score, best);
        current.pop();
    }
    search(cands, suffix, i + 1, current, total, best);
}

/// Greedy versus exhaustive decoding over a set of score matrices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecodeComparison {
    pub trials: usize,
    /// Greedy output identical to the exhaustive optimum.
    pub agreements: usize,
    pub agreement_rate: f64,
    /// Mean of `optimum − greedy` total margin.
    pub mean_gap: f64,
}

pub fn compare_decoders(all: &[SpanScores], exec: Execution) -> DecodeComparison {
    let rows = parallel::map(all, exec, |s| {
        let greedy = decode_tree(s);
        let (best, best_total) = exhaustive_decode(s);
        let cands = s.candidates();
        let greedy_total: f64 = cands
            .iter()
            .filter(|c| {
                greedy
                    .iter()
                    .any(|g| g.start == c.s0 && g.end == c.s1 && g.label == s.labels[c.label])
            })
            .map(|c| c.score)
            .sum();
        (greedy == best, best_total.max(0.0) - greedy_total)
    });
    let trials = rows.len();
    let agreements = rows.iter().filter(|r| r.0).count();
    let denom = trials.max(1) as f64;
    DecodeComparison {
        trials,
        agreements,
        agreement_rate: agreements as f64 / denom,
        mean_gap: rows.iter().map(|r| r.1).sum::<f64>() / denom,
    }
}

/// Micro-averaged labeled bracketing F1 of probe-decoded trees.
pub fn eval_span_probe(
    probe: &LinearProbe,
    trees: &[TreeSentence],
    cvs: &[ContextVectors],
    selection: LayerSelection,
    exec: Execution,
) -> Result<F1Score> {
    check_alignment(trees, cvs)?;
    let idx: Vec<usize> = (0..trees.len()).collect();
    let scores = parallel::try_map(&idx, exec, |&i| {
        let s = score_all_spans(&cvs[i], selection, probe)?;
        Ok::<_, Error>(bracketing_f1(&decode_tree(&s), &trees[i].spans))
    })?;
    Ok(scores
        .iter()
        .fold(F1Score::default(), |acc, s| acc.merge(s)))
}
