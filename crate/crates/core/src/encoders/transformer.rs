use rand::Rng;

use super::DropoutRng;
use crate::autodiff::{ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::nn::{LayerNorm, Linear};
use crate::tensor::NDArray;

/// `[len, dim]` sinusoidal position table.
pub fn sinusoidal_encoding(len: usize, dim: usize) -> NDArray {
    let mut pe = NDArray::zeros(&[len, dim]);
    for pos in 0..len {
        for i in 0..dim {
            let exponent = (2 * (i / 2)) as f64 / dim as f64;
            let angle = pos as f64 / 10000f64.powf(exponent);
            pe.set(pos, i, if i % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    pe
}

/// Pre-norm block: masked multi-head self-attention then a position-wise
/// feed-forward network, each wrapped in a residual connection.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformerLayer {
    pub attn_norm: LayerNorm,
    /// `[d, 3d]`, query | key | value
    pub qkv: Linear,
    pub out: Linear,
    pub ff_norm: LayerNorm,
    pub ff_in: Linear,
    pub ff_out: Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransformerStack {
    pub layers: Vec<TransformerLayer>,
    pub heads: usize,
    pub model_dim: usize,
    pub dropout: f64,
    pub max_len: usize,
}

impl TransformerStack {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        layers: usize,
        heads: usize,
        model_dim: usize,
        ff_dim: usize,
        dropout: f64,
        max_len: usize,
        input_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim != model_dim {
            return Err(Error::Config(format!(
                "transformer input dim {input_dim} must equal model dim {model_dim}"
            )));
        }
        let layers = (0..layers)
            .map(|i| {
                let n = format!("{prefix}.transformer{i}");
                TransformerLayer {
                    attn_norm: LayerNorm::new(store, &format!("{n}.attn_norm"), model_dim),
                    qkv: Linear::new(store, &format!("{n}.qkv"), model_dim, 3 * model_dim, true, rng),
                    out: Linear::new(store, &format!("{n}.attn_out"), model_dim, model_dim, true, rng),
                    ff_norm: LayerNorm::new(store, &format!("{n}.ff_norm"), model_dim),
                    ff_in: Linear::new(store, &format!("{n}.ff_in"), model_dim, ff_dim, true, rng),
                    ff_out: Linear::new(store, &format!("{n}.ff_out"), ff_dim, model_dim, true, rng),
                }
            })
            .collect();
        Ok(TransformerStack {
            layers,
            heads,
            model_dim,
            dropout,
            max_len,
        })
    }

    /// Forward-direction encoding. When `attention` is given, each layer's
    /// per-head attention matrices are appended to it.
    pub(super) fn encode_forward(
        &self,
        tape: &mut Tape,
        x: Var,
        mut dropout: Option<&mut DropoutRng>,
        mut attention: Option<&mut Vec<Vec<NDArray>>>,
    ) -> Result<Vec<Var>> {
        let (len, dim) = (tape.shape(x)[0], tape.shape(x)[1]);
        if len > self.max_len {
            return Err(Error::SequenceTooLong {
                len,
                max: self.max_len,
            });
        }
        if dim != self.model_dim {
            return Err(Error::shape(
                "transformer_encode",
                format!("input dim {dim} vs {}", self.model_dim),
            ));
        }
        let p = self.dropout;
        let mut drop = |tape: &mut Tape, v: Var| -> Result<Var> {
            match dropout.as_deref_mut() {
                Some(rng) => tape.dropout(v, p, rng),
                None => Ok(v),
            }
        };

        let scaled = tape.scale(x, (dim as f64).sqrt())?;
        let pe = tape.constant(sinusoidal_encoding(len, dim))?;
        let mut h = tape.add(scaled, pe)?;
        h = drop(tape, h)?;

        let dk = dim / self.heads;
        let inv_sqrt = 1.0 / (dk as f64).sqrt();
        let mut outs = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let a = layer.attn_norm.forward(tape, h)?;
            let qkv = layer.qkv.forward(tape, a)?;
            let mut contexts = Vec::with_capacity(self.heads);
            let mut maps = Vec::new();
            for head in 0..self.heads {
                let q = tape.slice_cols(qkv, head * dk, (head + 1) * dk)?;
                let k = tape.slice_cols(qkv, dim + head * dk, dim + (head + 1) * dk)?;
                let v = tape.slice_cols(qkv, 2 * dim + head * dk, 2 * dim + (head + 1) * dk)?;
                let kt = tape.transpose(k)?;
                let scores = tape.matmul(q, kt)?;
                let scores = tape.scale(scores, inv_sqrt)?;
                let probs = tape.softmax_rows_masked(scores, |i, j| j <= i)?;
                if attention.is_some() {
                    maps.push(tape.value(probs).clone());
                }
                contexts.push(tape.matmul(probs, v)?);
            }
            if let Some(store) = attention.as_deref_mut() {
                store.push(maps);
            }
            let ctx = tape.concat_cols(&contexts)?;
            let o = layer.out.forward(tape, ctx)?;
            let o = drop(tape, o)?;
            h = tape.add(h, o)?;

            let b = layer.ff_norm.forward(tape, h)?;
            let f = layer.ff_in.forward(tape, b)?;
            let f = tape.relu(f)?;
            let f = drop(tape, f)?;
            let f = layer.ff_out.forward(tape, f)?;
            let f = drop(tape, f)?;
            h = tape.add(h, f)?;
            outs.push(h);
        }
        Ok(outs)
    }

    /// Attention matrices (`[layer][head]`, each `[T, T]`) for an
    /// inference-mode forward-direction pass over `x`.
    pub fn attention_weights(&self, store: &ParamStore, x: &NDArray) -> Result<Vec<Vec<NDArray>>> {
        let mut tape = Tape::new(store);
        let xv = tape.constant(x.clone())?;
        let mut maps = Vec::new();
        self.encode_forward(&mut tape, xv, None, Some(&mut maps))?;
        Ok(maps)
    }
}
