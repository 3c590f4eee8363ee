use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::elmo::{ScalarMix, ScalarMixParams};
use crate::error::{Error, Result};
use crate::tensor::NDArray;

/// Smallest `γ` kept after a gradient step.
const MIN_GAMMA: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Coefficient of `½ λ ‖W‖²`.
    pub l2: f64,
    pub seed: u64,
    /// Penalty on the raw scalar-mix weights; zero disables it.
    pub mix_l2: f64,
    /// Z-score every feature column with training statistics first.
    pub standardize: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            learning_rate: 0.1,
            epochs: 100,
            l2: 1e-4,
            seed: 0,
            mix_l2: 0.0,
            standardize: true,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "probe learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.l2 < 0.0 || self.mix_l2 < 0.0 {
            return Err(Error::Config("probe penalties must be non-negative".into()));
        }
        Ok(())
    }
}

/// Multinomial logistic regression over frozen features, optionally
/// pooling several layers through a learned scalar mix first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearProbe {
    pub labels: Vec<String>,
    /// `[num labels, feature dim]`
    pub weight: NDArray,
    pub bias: Vec<f64>,
    pub mix: Option<ScalarMix>,
    /// Per-layer column statistics applied before mixing.
    pub scaling: Option<Vec<ColumnScaling>>,
}

/// `x ↦ (x − mean) / scale`, column-wise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ColumnScaling {
    /// Population mean and standard deviation; constant columns keep
    /// scale 1.
    pub fn fit(x: &NDArray) -> Self {
        let (rows, cols) = (x.rows() as f64, x.cols());
        let mut mean = vec![0.0; cols];
        for r in 0..x.rows() {
            for (m, v) in mean.iter_mut().zip(x.row_slice(r)) {
                *m += v / rows;
            }
        }
        let mut var = vec![0.0; cols];
        for r in 0..x.rows() {
            for ((s, v), m) in var.iter_mut().zip(x.row_slice(r)).zip(&mean) {
                *s += (v - m) * (v - m) / rows;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| if v > 1e-16 { v.sqrt() } else { 1.0 })
            .collect();
        ColumnScaling { mean, scale }
    }

    pub fn apply(&self, x: &NDArray) -> NDArray {
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, m), s) in out.row_slice_mut(r).iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        out
    }
}

fn rescale(features: &[NDArray], scaling: Option<&Vec<ColumnScaling>>) -> Vec<NDArray> {
    match scaling {
        Some(sc) => features.iter().zip(sc).map(|(f, s)| s.apply(f)).collect(),
        None => features.to_vec(),
    }
}

impl LinearProbe {
    pub fn feature_dim(&self) -> usize {
        self.weight.cols()
    }

    /// Number of feature matrices expected by [`LinearProbe::scores`].
    pub fn input_layers(&self) -> usize {
        self.mix.as_ref().map_or(1, ScalarMix::len)
    }

    pub fn label_id(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Affine scores `[M, C]` for `features`, one `[M, F]` matrix per layer.
    pub fn scores(&self, features: &[NDArray]) -> Result<NDArray> {
        let x = self.pooled(features)?;
        let mut s = x.matmul(&self.weight.transpose())?;
        for r in 0..s.rows() {
            for (v, b) in s.row_slice_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(s)
    }

    /// Argmax label id per row; ties go to the lowest id.
    pub fn predict(&self, features: &[NDArray]) -> Result<Vec<usize>> {
        let s = self.scores(features)?;
        Ok((0..s.rows()).map(|r| argmax(s.row_slice(r))).collect())
    }

    fn pooled(&self, features: &[NDArray]) -> Result<NDArray> {
        check_features(features, self.input_layers(), Some(self.feature_dim()))?;
        let features = rescale(features, self.scaling.as_ref());
        match &self.mix {
            None => Ok(features[0].clone()),
            Some(mix) => {
                let w = mix.normalized_weights()?;
                let mut acc = NDArray::zeros(features[0].shape());
                for (f, &wj) in features.iter().zip(&w) {
                    if wj == 0.0 {
                        continue;
                    }
                    let mut t = f.clone();
                    t.scale_assign(wj * mix.gamma);
                    acc.add_assign(&t);
                }
                Ok(acc)
            }
        }
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn check_features(features: &[NDArray], layers: usize, dim: Option<usize>) -> Result<(usize, usize)> {
    if features.len() != layers {
        return Err(Error::shape(
            "linear_probe",
            format!("{} feature matrices for {layers} layers", features.len()),
        ));
    }
    let shape = features[0].shape().to_vec();
    if shape.len() != 2 || shape[0] == 0 {
        return Err(Error::Empty("probe features"));
    }
    if features.iter().any(|f| f.shape() != shape.as_slice()) {
        return Err(Error::shape("linear_probe", "feature matrices differ in shape"));
    }
    if let Some(d) = dim {
        if shape[1] != d {
            return Err(Error::shape(
                "linear_probe",
                format!("feature dim {} but probe expects {d}", shape[1]),
            ));
        }
    }
    Ok((shape[0], shape[1]))
}

/// Trainable probe parameters inside a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeParams {
    /// `[F, C]`
    pub weight: ParamId,
    /// `[1, C]`
    pub bias: ParamId,
    pub mix: Option<ScalarMixParams>,
}

impl ProbeParams {
    /// Small uniform weights drawn from `seed`; a mix is attached when
    /// `layers > 1`.
    pub fn new(
        store: &mut ParamStore,
        feature_dim: usize,
        classes: usize,
        layers: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weight = store.add(
            "probe.weight",
            NDArray::uniform(&[feature_dim, classes], 0.01, &mut rng),
        );
        let bias = store.add("probe.bias", NDArray::zeros(&[1, classes]));
        let mix = if layers > 1 {
            Some(ScalarMixParams::new(store, "probe.mix", &ScalarMix::uniform(layers))?)
        } else {
            None
        };
        Ok(ProbeParams { weight, bias, mix })
    }

    /// Mean cross-entropy plus the configured penalties.
    pub fn loss(
        &self,
        tape: &mut Tape,
        features: &[NDArray],
        targets: &[usize],
        config: &ProbeConfig,
    ) -> Result<Var> {
        let inputs = features
            .iter()
            .map(|f| tape.constant(f.clone()))
            .collect::<Result<Vec<_>>>()?;
        let x = match &self.mix {
            Some(mix) => mix.pool(tape, &inputs)?,
            None => inputs[0],
        };
        let w = tape.param(self.weight);
        let b = tape.param(self.bias);
        let xw = tape.matmul(x, w)?;
        let logits = tape.add(xw, b)?;
        let nll = tape.cross_entropy(logits, targets)?;
        let mut loss = tape.scale(nll, 1.0 / targets.len() as f64)?;
        if config.l2 > 0.0 {
            let sq = tape.mul(w, w)?;
            let total = tape.sum(sq)?;
            let pen = tape.scale(total, 0.5 * config.l2)?;
            loss = tape.add(loss, pen)?;
        }
        if let (Some(mix), true) = (&self.mix, config.mix_l2 > 0.0) {
            let pen = mix.l2_penalty(tape, config.mix_l2)?;
            loss = tape.add(loss, pen)?;
        }
        Ok(loss)
    }

    fn export(
        &self,
        store: &ParamStore,
        labels: Vec<String>,
        scaling: Option<Vec<ColumnScaling>>,
    ) -> LinearProbe {
        LinearProbe {
            scaling,
            labels,
            weight: store.get(self.weight).transpose(),
            bias: store.get(self.bias).data().to_vec(),
            mix: self.mix.as_ref().map(|m| m.to_mix(store)),
        }
    }
}

/// Fits a probe by full-batch gradient descent. `features` holds one
/// `[M, F]` matrix per layer; more than one attaches a learned scalar mix.
/// The label vocabulary is the sorted set of distinct labels.
pub fn train_linear_probe<S: AsRef<str>>(
    features: &[NDArray],
    labels: &[S],
    config: &ProbeConfig,
) -> Result<LinearProbe> {
    config.validate()?;
    if features.is_empty() {
        return Err(Error::Empty("probe features"));
    }
    let (rows, dim) = check_features(features, features.len(), None)?;
    if labels.len() != rows {
        return Err(Error::shape(
            "train_linear_probe",
            format!("{rows} feature rows, {} labels", labels.len()),
        ));
    }
    let vocab: Vec<String> = labels
        .iter()
        .map(|l| l.as_ref().to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if vocab.len() < 2 {
        return Err(Error::Config(format!(
            "probe needs at least 2 distinct labels, found {}",
            vocab.len()
        )));
    }
    let targets: Vec<usize> = labels
        .iter()
        .map(|l| vocab.binary_search_by(|v| v.as_str().cmp(l.as_ref())).expect("label in vocab"))
        .collect();

    let scaling = config
        .standardize
        .then(|| features.iter().map(ColumnScaling::fit).collect::<Vec<_>>());
    let scaled = rescale(features, scaling.as_ref());
    let features = scaled.as_slice();

    let mut store = ParamStore::new();
    let params = ProbeParams::new(&mut store, dim, vocab.len(), features.len(), config.seed)?;
    for epoch in 0..config.epochs {
        let grads = {
            let mut tape = Tape::new(&store);
            let loss = params.loss(&mut tape, features, &targets, config)?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(Error::Divergence { step: epoch, loss: value });
            }
            tape.backward(loss)?
        };
        for (id, g) in grads.iter() {
            let p = store.get_mut(id);
            for (v, gv) in p.data_mut().iter_mut().zip(g.data()) {
                *v -= config.learning_rate * gv;
            }
        }
        if let Some(mix) = &params.mix {
            let g = store.get_mut(mix.gamma);
            let v = g.data_mut();
            v[0] = v[0].max(MIN_GAMMA);
        }
    }
    Ok(params.export(&store, vocab, scaling))
}

/// Fraction of rows whose prediction equals `gold`; gold labels unknown to
/// the probe count as errors.
pub fn probe_accuracy<S: AsRef<str>>(probe: &LinearProbe, features: &[NDArray], gold: &[S]) -> Result<f64> {
    let pred = probe.predict(features)?;
    if pred.len() != gold.len() {
        return Err(Error::shape(
            "probe_accuracy",
            format!("{} predictions, {} gold labels", pred.len(), gold.len()),
        ));
    }
    let correct = pred
        .iter()
        .zip(gold)
        .filter(|(&p, g)| probe.labels[p] == g.as_ref())
        .count();
    Ok(correct as f64 / gold.len() as f64)
}
