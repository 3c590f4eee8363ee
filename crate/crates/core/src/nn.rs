//! Small building blocks shared by the encoders.

use rand::Rng;

use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::error::Result;
use crate::tensor::NDArray;

/// Affine map `x W + b` with `W: [in, out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl Linear {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let scale = 1.0 / (input as f64).sqrt();
        let weight = store.add(
            format!("{name}.weight"),
            NDArray::uniform(&[input, output], scale, rng),
        );
        let bias = bias.then(|| store.add(format!("{name}.bias"), NDArray::zeros(&[1, output])));
        Linear { weight, bias }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let w = tape.param(self.weight);
        let y = tape.matmul(x, w)?;
        match self.bias {
            Some(b) => {
                let b = tape.param(b);
                tape.add(y, b)
            }
            None => Ok(y),
        }
    }

    pub fn input_dim(&self, store: &ParamStore) -> usize {
        store.get(self.weight).rows()
    }

    pub fn output_dim(&self, store: &ParamStore) -> usize {
        store.get(self.weight).cols()
    }
}

/// Learned gain and bias applied after [`Tape::layer_norm`].
#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub const EPS: f64 = 1e-5;

    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        LayerNorm {
            gain: store.add(format!("{name}.gain"), NDArray::full(&[1, dim], 1.0)),
            bias: store.add(format!("{name}.bias"), NDArray::zeros(&[1, dim])),
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let n = tape.layer_norm(x, Self::EPS)?;
        let g = tape.param(self.gain);
        let b = tape.param(self.bias);
        let y = tape.mul(n, g)?;
        tape.add(y, b)
    }
}
