use serde::{Deserialize, Serialize};

use crate::bilm::ContextVectors;
use crate::error::{Error, Result};
use crate::tensor::NDArray;

/// Which representation a probe reads: one layer, or every layer pooled by
/// a learned scalar mix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSelection {
    Layer(usize),
    Weighted,
}

impl LayerSelection {
    /// Layer indices fed to the probe, in order.
    pub fn layers(self, available: usize) -> Result<Vec<usize>> {
        match self {
            LayerSelection::Layer(i) if i < available => Ok(vec![i]),
            LayerSelection::Layer(i) => Err(Error::OutOfRange(format!(
                "layer {i} of {available}"
            ))),
            LayerSelection::Weighted => Ok((0..available).collect()),
        }
    }
}

/// Stacks per-sentence matrices produced by `per_layer(cv, layer)` into one
/// matrix per selected layer.
pub(crate) fn stack_features<F>(
    cvs: &[ContextVectors],
    selection: LayerSelection,
    per_layer: F,
) -> Result<Vec<NDArray>>
where
    F: Fn(&ContextVectors, usize) -> Result<NDArray>,
{
    let first = cvs.first().ok_or(Error::Empty("context vectors"))?;
    let layers = selection.layers(first.num_layers())?;
    layers
        .iter()
        .map(|&layer| {
            let parts = cvs
                .iter()
                .map(|cv| per_layer(cv, layer))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&NDArray> = parts.iter().collect();
            NDArray::concat_rows(&refs)
        })
        .collect()
}

/// Token rows of every sentence, one matrix per selected layer.
pub fn token_features(cvs: &[ContextVectors], selection: LayerSelection) -> Result<Vec<NDArray>> {
    stack_features(cvs, selection, |cv, layer| cv.layer(layer).cloned())
}
