use serde::{Deserialize, Serialize};

use crate::bilm::ContextVectors;
use crate::data_io::{PronounInstance, TreeSentence};
use crate::error::{Error, Result};
use crate::parallel::{self, Execution};
use crate::tensor;

/// Pronoun vector minus the mean of its smallest multi-word constituent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjustedVector {
    pub vector: Vec<f64>,
    /// No multi-word constituent contained the pronoun, so the sentence
    /// mean was subtracted instead.
    pub fallback: bool,
}

pub fn coref_adjust(
    cv: &ContextVectors,
    layer: usize,
    pronoun: usize,
    tree: &TreeSentence,
) -> Result<AdjustedVector> {
    if pronoun >= cv.len() {
        return Err(Error::OutOfRange(format!("pronoun {pronoun} in sentence of {}", cv.len())));
    }
    if tree.len() != cv.len() {
        return Err(Error::shape(
            "coref_adjust",
            format!("tree has {} tokens, vectors {}", tree.len(), cv.len()),
        ));
    }
    let h = cv.layer(layer)?;
    let (range, fallback) = match tree.smallest_multiword_span(pronoun) {
        Some(s) => (s.start..=s.end, false),
        None => (0..=cv.len() - 1, true),
    };
    let count = range.clone().count() as f64;
    let mut vector = h.row_slice(pronoun).to_vec();
    for k in range {
        for (v, x) in vector.iter_mut().zip(h.row_slice(k)) {
            *v -= x / count;
        }
    }
    Ok(AdjustedVector { vector, fallback })
}

/// Candidate most cosine-similar to `adjusted`; `None` when filtering
/// leaves no candidate. Ties and zero vectors favor the earlier noun.
pub fn coref_resolve(
    adjusted: &[f64],
    cv: &ContextVectors,
    layer: usize,
    instance: &PronounInstance,
    agreement: bool,
) -> Result<Option<usize>> {
    let h = cv.layer(layer)?;
    if adjusted.len() != h.cols() {
        return Err(Error::shape(
            "coref_resolve",
            format!("adjusted vector has {} dims, layer {}", adjusted.len(), h.cols()),
        ));
    }
    let mut best: Option<(usize, f64)> = None;
    for k in instance.filtered_candidates(agreement) {
        if k >= h.rows() {
            return Err(Error::OutOfRange(format!("candidate {k} in sentence of {}", h.rows())));
        }
        let sim = tensor::cosine(adjusted, h.row_slice(k)).unwrap_or(0.0);
        if best.is_none_or(|(_, b)| sim > b) {
            best = Some((k, sim));
        }
    }
    Ok(best.map(|(k, _)| k))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorefBaseline {
    Closest,
    First,
    ClosestAgreement,
    FirstAgreement,
}

impl CorefBaseline {
    pub const ALL: [CorefBaseline; 4] = [
        CorefBaseline::Closest,
        CorefBaseline::First,
        CorefBaseline::ClosestAgreement,
        CorefBaseline::FirstAgreement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorefBaseline::Closest => "closest",
            CorefBaseline::First => "first",
            CorefBaseline::ClosestAgreement => "closest_agreement",
            CorefBaseline::FirstAgreement => "first_agreement",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        CorefBaseline::ALL
            .into_iter()
            .find(|b| b.name() == name.replace(['-', '+'], "_"))
    }

    fn agreement(self) -> bool {
        matches!(self, CorefBaseline::ClosestAgreement | CorefBaseline::FirstAgreement)
    }
}

pub fn coref_baseline(instance: &PronounInstance, variant: CorefBaseline) -> Option<usize> {
    let cands = instance.filtered_candidates(variant.agreement());
    match variant {
        CorefBaseline::Closest | CorefBaseline::ClosestAgreement => cands.last().copied(),
        CorefBaseline::First | CorefBaseline::FirstAgreement => cands.first().copied(),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorefScore {
    pub correct: usize,
    /// Instances that produced a choice.
    pub attempted: usize,
    /// Instances without a candidate.
    pub skipped: usize,
    /// `correct / attempted`
    pub accuracy: f64,
    /// Resolutions that used the sentence-mean fallback.
    pub fallbacks: usize,
}

fn score(choices: &[(Option<usize>, bool)], instances: &[PronounInstance]) -> CorefScore {
    let mut s = CorefScore::default();
    for ((choice, fallback), inst) in choices.iter().zip(instances) {
        s.fallbacks += usize::from(*fallback);
        match choice {
            Some(k) => {
                s.attempted += 1;
                s.correct += usize::from(*k == inst.antecedent_head);
            }
            None => s.skipped += 1,
        }
    }
    s.accuracy = if s.attempted == 0 {
        0.0
    } else {
        s.correct as f64 / s.attempted as f64
    };
    s
}

pub fn evaluate_baseline(instances: &[PronounInstance], variant: CorefBaseline) -> CorefScore {
    let choices: Vec<_> = instances
        .iter()
        .map(|i| (coref_baseline(i, variant), false))
        .collect();
    score(&choices, instances)
}

/// Resolves every instance with the adjusted-vector rule. `cvs[i]` holds
/// the vectors of `instances[i].sentence`.
pub fn evaluate_coref(
    instances: &[PronounInstance],
    cvs: &[ContextVectors],
    layer: usize,
    agreement: bool,
    exec: Execution,
) -> Result<CorefScore> {
    if instances.len() != cvs.len() {
        return Err(Error::shape(
            "evaluate_coref",
            format!("{} instances, {} context vectors", instances.len(), cvs.len()),
        ));
    }
    let idx: Vec<usize> = (0..instances.len()).collect();
    let choices = parallel::try_map(&idx, exec, |&i| {
        let inst = &instances[i];
        let adj = coref_adjust(&cvs[i], layer, inst.pronoun, &inst.sentence)?;
        let choice = coref_resolve(&adj.vector, &cvs[i], layer, inst, agreement)?;
        Ok::<_, Error>((choice, adj.fallback))
    })?;
    Ok(score(&choices, instances))
}
