use rand::Rng;

use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::NDArray;

/// LSTM cell (no peepholes) whose hidden state is linearly projected before
/// it is emitted and fed back.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer {
    /// `[input, 4H]`, gate order i, f, g, o
    pub input_weight: ParamId,
    /// `[P, 4H]`
    pub recurrent_weight: ParamId,
    /// `[1, 4H]`
    pub bias: ParamId,
    /// `[H, P]`
    pub projection: ParamId,
    pub hidden_dim: usize,
    pub projection_dim: usize,
}

impl LstmLayer {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
        projection_dim: usize,
        rng: &mut R,
    ) -> Self {
        let h4 = 4 * hidden_dim;
        let input_weight = store.add(
            format!("{name}.w_input"),
            NDArray::uniform(&[input_dim, h4], 1.0 / (input_dim as f64).sqrt(), rng),
        );
        let recurrent_weight = store.add(
            format!("{name}.w_recurrent"),
            NDArray::uniform(&[projection_dim, h4], 1.0 / (projection_dim as f64).sqrt(), rng),
        );
        let mut b = NDArray::zeros(&[1, h4]);
        for v in &mut b.data_mut()[hidden_dim..2 * hidden_dim] {
            *v = 1.0;
        }
        let bias = store.add(format!("{name}.bias"), b);
        let projection = store.add(
            format!("{name}.w_projection"),
            NDArray::uniform(&[hidden_dim, projection_dim], 1.0 / (hidden_dim as f64).sqrt(), rng),
        );
        LstmLayer {
            input_weight,
            recurrent_weight,
            bias,
            projection,
            hidden_dim,
            projection_dim,
        }
    }

    /// Runs the recurrence over the rows of `x: [T, input]`, giving the
    /// projected states `[T, P]`.
    pub fn run(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let h = self.hidden_dim;
        let wx = tape.param(self.input_weight);
        let wh = tape.param(self.recurrent_weight);
        let wp = tape.param(self.projection);
        let b = tape.param(self.bias);
        let xw = tape.matmul(x, wx)?;
        let xw = tape.add(xw, b)?;
        let steps = tape.shape(x)[0];

        let mut r = tape.constant(NDArray::zeros(&[1, self.projection_dim]))?;
        let mut c = tape.constant(NDArray::zeros(&[1, h]))?;
        let mut outs = Vec::with_capacity(steps);
        for t in 0..steps {
            let xt = tape.slice_rows(xw, t, t + 1)?;
            let rec = tape.matmul(r, wh)?;
            let gates = tape.add(xt, rec)?;
            let i = tape.slice_cols(gates, 0, h)?;
            let f = tape.slice_cols(gates, h, 2 * h)?;
            let g = tape.slice_cols(gates, 2 * h, 3 * h)?;
            let o = tape.slice_cols(gates, 3 * h, 4 * h)?;
            let i = tape.sigmoid(i)?;
            let f = tape.sigmoid(f)?;
            let g = tape.tanh(g)?;
            let o = tape.sigmoid(o)?;
            let keep = tape.mul(f, c)?;
            let write = tape.mul(i, g)?;
            c = tape.add(keep, write)?;
            let tc = tape.tanh(c)?;
            let hidden = tape.mul(o, tc)?;
            r = tape.matmul(hidden, wp)?;
            outs.push(r);
        }
        tape.concat_rows(&outs)
    }
}

/// Stacked projected LSTMs with residual connections between layers.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmStack {
    pub layers: Vec<LstmLayer>,
}

impl LstmStack {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        layers: usize,
        input_dim: usize,
        hidden_dim: usize,
        projection_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim != projection_dim {
            return Err(Error::Config(format!(
                "lstm input dim {input_dim} must equal projection dim {projection_dim}"
            )));
        }
        let layers = (0..layers)
            .map(|i| {
                LstmLayer::new(
                    store,
                    &format!("{prefix}.lstm{i}"),
                    projection_dim,
                    hidden_dim,
                    projection_dim,
                    rng,
                )
            })
            .collect();
        Ok(LstmStack { layers })
    }

    pub(super) fn encode_forward(&self, tape: &mut Tape, x: Var) -> Result<Vec<Var>> {
        let expected = self.layers[0].projection_dim;
        if tape.shape(x)[1] != expected {
            return Err(Error::shape(
                "lstm_proj_encode",
                format!("input dim {} vs {expected}", tape.shape(x)[1]),
            ));
        }
        let mut outs = Vec::with_capacity(self.layers.len());
        let mut input = x;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = layer.run(tape, input)?;
            if i > 0 {
                y = tape.add(y, input)?;
            }
            outs.push(y);
            input = y;
        }
        Ok(outs)
    }
}
