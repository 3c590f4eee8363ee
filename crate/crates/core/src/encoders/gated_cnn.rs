use rand::Rng;

use super::DropoutRng;
use crate::autodiff::{ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::nn::Linear;

/// Tokens visible to one top-layer position: `1 + sum(width - 1)`.
pub fn receptive_field(blocks: &[(usize, usize)]) -> usize {
    1 + blocks.iter().map(|&(w, _)| w.saturating_sub(1)).sum::<usize>()
}

/// Residual GLU block over a causal convolution:
/// `(X*W + b) * sigmoid(X*V + c) + shortcut(X)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GatedCnnBlock {
    pub width: usize,
    pub channels: usize,
    /// `[width * in, channels]`
    pub linear: Linear,
    pub gate: Linear,
    /// Learned map used when input and output channels differ.
    pub shortcut: Option<Linear>,
}

impl GatedCnnBlock {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        width: usize,
        in_channels: usize,
        channels: usize,
        rng: &mut R,
    ) -> Self {
        let fan_in = width * in_channels;
        GatedCnnBlock {
            width,
            channels,
            linear: Linear::new(store, &format!("{name}.linear"), fan_in, channels, true, rng),
            gate: Linear::new(store, &format!("{name}.gate"), fan_in, channels, true, rng),
            shortcut: (in_channels != channels).then(|| {
                Linear::new(store, &format!("{name}.shortcut"), in_channels, channels, false, rng)
            }),
        }
    }

    pub fn in_channels(&self, store: &ParamStore) -> usize {
        self.linear.input_dim(store) / self.width
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let windows = tape.windows(x, self.width, self.width - 1, 0)?;
        let a = self.linear.forward(tape, windows)?;
        let b = self.gate.forward(tape, windows)?;
        let g = tape.sigmoid(b)?;
        let h = tape.mul(a, g)?;
        let residual = match &self.shortcut {
            Some(s) => s.forward(tape, x)?,
            None => x,
        };
        tape.add(h, residual)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GatedCnnStack {
    pub blocks: Vec<GatedCnnBlock>,
    pub dropout: f64,
}

impl GatedCnnStack {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        blocks: &[(usize, usize)],
        dropout: f64,
        input_dim: usize,
        rng: &mut R,
    ) -> Self {
        let mut in_ch = input_dim;
        let blocks = blocks
            .iter()
            .enumerate()
            .map(|(i, &(width, channels))| {
                let b = GatedCnnBlock::new(store, &format!("{prefix}.cnn{i}"), width, in_ch, channels, rng);
                in_ch = channels;
                b
            })
            .collect();
        GatedCnnStack { blocks, dropout }
    }

    pub(super) fn encode_forward(
        &self,
        tape: &mut Tape,
        x: Var,
        mut dropout: Option<&mut DropoutRng>,
    ) -> Result<Vec<Var>> {
        let mut h = x;
        let mut outs = Vec::with_capacity(self.blocks.len());
        for (i, block) in self.blocks.iter().enumerate() {
            let expected = block.in_channels(tape.store());
            if tape.shape(h)[1] != expected {
                return Err(Error::shape(
                    "gated_cnn_encode",
                    format!("block {i} expects {expected} channels, got {}", tape.shape(h)[1]),
                ));
            }
            if i > 0 {
                if let Some(rng) = dropout.as_deref_mut() {
                    h = tape.dropout(h, self.dropout, rng)?;
                }
            }
            h = block.forward(tape, h)?;
            outs.push(h);
        }
        Ok(outs)
    }
}
