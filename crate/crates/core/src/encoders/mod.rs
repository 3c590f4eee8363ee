//! Directional contextual encoders.
//!
//! Every encoder is written for the forward direction: position `k` sees
//! positions `<= k` only. The backward direction reverses the input rows,
//! runs the same computation and reverses every output, so position `k` sees
//! positions `>= k`.

mod gated_cnn;
mod lstm;
mod transformer;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use gated_cnn::{receptive_field, GatedCnnBlock, GatedCnnStack};
pub use lstm::{LstmLayer, LstmStack};
pub use transformer::{sinusoidal_encoding, TransformerLayer, TransformerStack};

use crate::autodiff::{ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::NDArray;

/// Random source for dropout masks.
pub type DropoutRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderArch {
    LstmProj {
        layers: usize,
        hidden_dim: usize,
        projection_dim: usize,
    },
    Transformer {
        layers: usize,
        heads: usize,
        model_dim: usize,
        ff_dim: usize,
        dropout: f64,
        max_len: usize,
    },
    GatedCnn {
        /// `(kernel width, channels)` per residual block.
        blocks: Vec<(usize, usize)>,
        dropout: f64,
    },
}

impl EncoderArch {
    pub fn desk_lstm() -> Self {
        EncoderArch::LstmProj {
            layers: 2,
            hidden_dim: 256,
            projection_dim: 64,
        }
    }

    pub fn desk_transformer() -> Self {
        EncoderArch::Transformer {
            layers: 2,
            heads: 4,
            model_dim: 64,
            ff_dim: 256,
            dropout: 0.1,
            max_len: 512,
        }
    }

    pub fn desk_gated_cnn() -> Self {
        EncoderArch::GatedCnn {
            blocks: vec![(3, 64); 4],
            dropout: 0.0,
        }
    }

    /// Two layers, 4096-dim cells projected to 512.
    pub fn full_lstm_2layer() -> Self {
        EncoderArch::LstmProj {
            layers: 2,
            hidden_dim: 4096,
            projection_dim: 512,
        }
    }

    pub fn full_lstm_4layer() -> Self {
        EncoderArch::LstmProj {
            layers: 4,
            hidden_dim: 4096,
            projection_dim: 512,
        }
    }

    /// The "base" configuration: six 512-dim layers.
    pub fn full_transformer() -> Self {
        EncoderArch::Transformer {
            layers: 6,
            heads: 8,
            model_dim: 512,
            ff_dim: 2048,
            dropout: 0.1,
            max_len: 512,
        }
    }

    /// Sixteen `[4, 512]` residual blocks.
    pub fn full_gated_cnn() -> Self {
        EncoderArch::GatedCnn {
            blocks: vec![(4, 512); 16],
            dropout: 0.05,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            EncoderArch::LstmProj { .. } => "lstm_proj",
            EncoderArch::Transformer { .. } => "transformer",
            EncoderArch::GatedCnn { .. } => "gated_cnn",
        }
    }

    /// Width of every emitted layer.
    pub fn model_dim(&self) -> usize {
        match self {
            EncoderArch::LstmProj { projection_dim, .. } => *projection_dim,
            EncoderArch::Transformer { model_dim, .. } => *model_dim,
            EncoderArch::GatedCnn { blocks, .. } => blocks.last().map_or(0, |b| b.1),
        }
    }

    pub fn layer_count(&self) -> usize {
        match self {
            EncoderArch::LstmProj { layers, .. } | EncoderArch::Transformer { layers, .. } => {
                *layers
            }
            EncoderArch::GatedCnn { blocks, .. } => blocks.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("{}: {m}", self.kind())));
        match self {
            EncoderArch::LstmProj {
                layers,
                hidden_dim,
                projection_dim,
            } => {
                if *layers == 0 || *hidden_dim == 0 || *projection_dim == 0 {
                    return bad("layers and dims must be >= 1".into());
                }
                if projection_dim > hidden_dim {
                    return bad(format!(
                        "projection dim {projection_dim} exceeds hidden dim {hidden_dim}"
                    ));
                }
            }
            EncoderArch::Transformer {
                layers,
                heads,
                model_dim,
                ff_dim,
                dropout,
                max_len,
            } => {
                if *layers == 0 || *heads == 0 || *model_dim == 0 || *ff_dim == 0 || *max_len == 0
                {
                    return bad("layers, heads, dims and max_len must be >= 1".into());
                }
                if model_dim % heads != 0 {
                    return bad(format!("model dim {model_dim} not divisible by {heads} heads"));
                }
                if !(0.0..1.0).contains(dropout) {
                    return bad(format!("dropout {dropout} outside [0, 1)"));
                }
            }
            EncoderArch::GatedCnn { blocks, dropout } => {
                if blocks.is_empty() {
                    return bad("at least one block required".into());
                }
                if blocks.iter().any(|&(w, c)| w == 0 || c == 0) {
                    return bad("kernel widths and channels must be >= 1".into());
                }
                if !(0.0..1.0).contains(dropout) {
                    return bad(format!("dropout {dropout} outside [0, 1)"));
                }
            }
        }
        Ok(())
    }
}

/// One direction's contextual stack.
#[derive(Clone, Debug, PartialEq)]
pub enum ContextualStack {
    Lstm(LstmStack),
    Transformer(TransformerStack),
    GatedCnn(GatedCnnStack),
}

impl ContextualStack {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        arch: &EncoderArch,
        input_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        arch.validate()?;
        Ok(match arch {
            EncoderArch::LstmProj {
                layers,
                hidden_dim,
                projection_dim,
            } => ContextualStack::Lstm(LstmStack::new(
                store,
                prefix,
                *layers,
                input_dim,
                *hidden_dim,
                *projection_dim,
                rng,
            )?),
            EncoderArch::Transformer {
                layers,
                heads,
                model_dim,
                ff_dim,
                dropout,
                max_len,
            } => ContextualStack::Transformer(TransformerStack::new(
                store, prefix, *layers, *heads, *model_dim, *ff_dim, *dropout, *max_len,
                input_dim, rng,
            )?),
            EncoderArch::GatedCnn { blocks, dropout } => ContextualStack::GatedCnn(
                GatedCnnStack::new(store, prefix, blocks, *dropout, input_dim, rng),
            ),
        })
    }

    fn encode_forward(
        &self,
        tape: &mut Tape,
        x: Var,
        dropout: Option<&mut DropoutRng>,
    ) -> Result<Vec<Var>> {
        match self {
            ContextualStack::Lstm(s) => s.encode_forward(tape, x),
            ContextualStack::Transformer(s) => s.encode_forward(tape, x, dropout, None),
            ContextualStack::GatedCnn(s) => s.encode_forward(tape, x, dropout),
        }
    }

    /// Per-layer states `[T, model dim]`, bottom-up. `dropout` enables
    /// training-mode dropout.
    pub fn encode(
        &self,
        tape: &mut Tape,
        x: Var,
        direction: Direction,
        dropout: Option<&mut DropoutRng>,
    ) -> Result<Vec<Var>> {
        match direction {
            Direction::Forward => self.encode_forward(tape, x, dropout),
            Direction::Backward => {
                let rev = tape.reverse_rows(x)?;
                let outs = self.encode_forward(tape, rev, dropout)?;
                outs.into_iter().map(|o| tape.reverse_rows(o)).collect()
            }
        }
    }

    /// Inference-mode encoding of a plain array.
    pub fn encode_array(
        &self,
        store: &ParamStore,
        x: &NDArray,
        direction: Direction,
    ) -> Result<Vec<NDArray>> {
        let mut tape = Tape::new(store);
        let xv = tape.constant(x.clone())?;
        let outs = self.encode(&mut tape, xv, direction, None)?;
        Ok(outs.into_iter().map(|v| tape.value(v).clone()).collect())
    }

    pub fn layer_count(&self) -> usize {
        match self {
            ContextualStack::Lstm(s) => s.layers.len(),
            ContextualStack::Transformer(s) => s.layers.len(),
            ContextualStack::GatedCnn(s) => s.blocks.len(),
        }
    }
}
