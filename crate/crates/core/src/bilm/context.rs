use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::NDArray;

/// Per-sentence stack of `L + 1` layers, each `[N, 2d]`. Row `k` of layer
/// `i` is the forward state followed by the backward state; layer 0 holds
/// the word embedding twice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextVectors {
    tokens: Vec<String>,
    layers: Vec<NDArray>,
}

impl ContextVectors {
    pub fn new(tokens: Vec<String>, layers: Vec<NDArray>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Empty("sentence"));
        }
        let first = layers.first().ok_or(Error::Empty("context layers"))?;
        let dim = first.cols();
        if dim % 2 != 0 {
            return Err(Error::shape("context_vectors", format!("odd row dim {dim}")));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.shape() != [tokens.len(), dim] {
                return Err(Error::shape(
                    "context_vectors",
                    format!("layer {i} is {:?}, expected [{}, {dim}]", l.shape(), tokens.len()),
                ));
            }
        }
        Ok(ContextVectors { tokens, layers })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Number of tokens `N`.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// `L + 1`.
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// `2d`.
    pub fn dim(&self) -> usize {
        self.layers[0].cols()
    }

    pub fn layers(&self) -> &[NDArray] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> Result<&NDArray> {
        self.layers.get(i).ok_or_else(|| {
            Error::OutOfRange(format!("layer {i} of {} layers", self.layers.len()))
        })
    }

    pub fn row(&self, layer: usize, k: usize) -> &[f64] {
        self.layers[layer].row_slice(k)
    }

    /// Keeps only the listed layers, in the given order.
    pub fn select_layers(&self, keep: &[usize]) -> Result<ContextVectors> {
        let layers = keep
            .iter()
            .map(|&i| self.layer(i).cloned())
            .collect::<Result<Vec<_>>>()?;
        ContextVectors::new(self.tokens.clone(), layers)
    }

    /// Rounds every value through `f32`, matching the vector-dump payload.
    pub fn to_f32_precision(&self) -> ContextVectors {
        ContextVectors {
            tokens: self.tokens.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| l.map(|v| v as f32 as f64))
                .collect(),
        }
    }
}
