use super::features::{token_features, LayerSelection};
use super::linear::{probe_accuracy, train_linear_probe, LinearProbe, ProbeConfig};
use crate::bilm::ContextVectors;
use crate::data_io::TaggedSentence;
use crate::error::{Error, Result};

fn check_alignment(sentences: &[TaggedSentence], cvs: &[ContextVectors]) -> Result<Vec<String>> {
    if sentences.len() != cvs.len() {
        return Err(Error::shape(
            "pos_probe",
            format!("{} sentences, {} context vectors", sentences.len(), cvs.len()),
        ));
    }
    let mut tags = Vec::new();
    for (i, (s, cv)) in sentences.iter().zip(cvs).enumerate() {
        if s.tags.len() != s.tokens.len() || s.tokens != cv.tokens() {
            return Err(Error::shape(
                "pos_probe",
                format!("sentence {i}: tokens and tags are not aligned with its vectors"),
            ));
        }
        tags.extend(s.tags.iter().cloned());
    }
    Ok(tags)
}

pub fn train_pos_probe(
    sentences: &[TaggedSentence],
    cvs: &[ContextVectors],
    selection: LayerSelection,
    config: &ProbeConfig,
) -> Result<LinearProbe> {
    let tags = check_alignment(sentences, cvs)?;
    train_linear_probe(&token_features(cvs, selection)?, &tags, config)
}

/// Token-level tagging accuracy.
pub fn eval_pos_probe(
    probe: &LinearProbe,
    sentences: &[TaggedSentence],
    cvs: &[ContextVectors],
    selection: LayerSelection,
) -> Result<f64> {
    let tags = check_alignment(sentences, cvs)?;
    probe_accuracy(probe, &token_features(cvs, selection)?, &tags)
}
