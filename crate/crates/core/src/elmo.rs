//! Learned convex combination of biLM layers, scaled by `γ`.

use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::bilm::ContextVectors;
use crate::error::{Error, Result};
use crate::tensor::{self, NDArray};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarMix {
    /// Unnormalized layer weights `s`, one per layer.
    pub raw: Vec<f64>,
    pub gamma: f64,
}

impl ScalarMix {
    pub fn new(raw: Vec<f64>, gamma: f64) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Empty("scalar mix weights"));
        }
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(Error::Config(format!("gamma must be finite and > 0, got {gamma}")));
        }
        Ok(ScalarMix { raw, gamma })
    }

    /// Zero raw weights and `γ = 1`.
    pub fn uniform(layers: usize) -> Self {
        ScalarMix {
            raw: vec![0.0; layers.max(1)],
            gamma: 1.0,
        }
    }

    /// Mix that selects layer `i` exactly.
    pub fn one_hot(layers: usize, i: usize) -> Self {
        let mut raw = vec![f64::NEG_INFINITY; layers];
        raw[i] = 0.0;
        ScalarMix { raw, gamma: 1.0 }
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// `softmax(s)`. Entries of `-inf` receive weight zero.
    pub fn normalized_weights(&self) -> Result<Vec<f64>> {
        if self.raw.iter().any(|v| v.is_nan() || *v == f64::INFINITY)
            || self.raw.iter().all(|v| *v == f64::NEG_INFINITY)
        {
            return Err(Error::NonFinite {
                op: "normalized_weights",
            });
        }
        Ok(tensor::softmax(&self.raw))
    }
}

/// `γ Σ_j softmax(s)_j h_{k,j}` for every position: `[N, 2d]`.
pub fn elmo_pool(cv: &ContextVectors, mix: &ScalarMix) -> Result<NDArray> {
    if mix.len() != cv.num_layers() {
        return Err(Error::shape(
            "elmo_pool",
            format!("mix has {} weights for {} layers", mix.len(), cv.num_layers()),
        ));
    }
    let w = mix.normalized_weights()?;
    let mut out = NDArray::zeros(cv.layers()[0].shape());
    for (layer, &wj) in cv.layers().iter().zip(&w) {
        if wj == 0.0 {
            continue;
        }
        for (o, &v) in out.data_mut().iter_mut().zip(layer.data()) {
            *o += wj * v;
        }
    }
    out.scale_assign(mix.gamma);
    Ok(out)
}

/// Trainable counterpart of [`ScalarMix`] living in a parameter store.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarMixParams {
    /// `[1, L + 1]`
    pub weights: ParamId,
    /// `[1, 1]`
    pub gamma: ParamId,
}

impl ScalarMixParams {
    pub fn new(store: &mut ParamStore, name: &str, init: &ScalarMix) -> Result<Self> {
        let weights = store.add(format!("{name}.s"), NDArray::row(&init.raw));
        let gamma = store.add(format!("{name}.gamma"), NDArray::new(vec![1, 1], vec![init.gamma])?);
        Ok(ScalarMixParams { weights, gamma })
    }

    pub fn layers(&self, store: &ParamStore) -> usize {
        store.get(self.weights).cols()
    }

    /// Records the pooled `[N, 2d]` matrix from per-layer inputs.
    pub fn pool(&self, tape: &mut Tape, layers: &[Var]) -> Result<Var> {
        let s = tape.param(self.weights);
        if tape.shape(s)[1] != layers.len() {
            return Err(Error::shape(
                "scalar_mix",
                format!("{} weights for {} layers", tape.shape(s)[1], layers.len()),
            ));
        }
        let w = tape.softmax_rows(s)?;
        let mut acc = None;
        for (j, &h) in layers.iter().enumerate() {
            let wj = tape.slice_cols(w, j, j + 1)?;
            let term = tape.mul(h, wj)?;
            acc = Some(match acc {
                None => term,
                Some(a) => tape.add(a, term)?,
            });
        }
        let g = tape.param(self.gamma);
        tape.mul(acc.ok_or(Error::Empty("layers"))?, g)
    }

    /// `λ Σ s_j²`
    pub fn l2_penalty(&self, tape: &mut Tape, lambda: f64) -> Result<Var> {
        let s = tape.param(self.weights);
        let sq = tape.mul(s, s)?;
        let total = tape.sum(sq)?;
        tape.scale(total, lambda)
    }

    pub fn to_mix(&self, store: &ParamStore) -> ScalarMix {
        ScalarMix {
            raw: store.get(self.weights).data().to_vec(),
            gamma: store.get(self.gamma).item(),
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::autodiff::grad_check;

    fn stack(layers: Vec<Vec<f64>>, n: usize) -> ContextVectors {
        let dim = layers[0].len() / n;
        let ls = layers
            .into_iter()
            .map(|d| NDArray::new(vec![n, dim], d).unwrap())
            .collect();
        ContextVectors::new((0..n).map(|i| format!("w{i}")).collect(), ls).unwrap()
    }

    fn random_stack(layers: usize, n: usize, dim: usize, seed: u64) -> ContextVectors {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ls = (0..layers)
            .map(|_| NDArray::uniform(&[n, dim], 2.0, &mut rng))
            .collect();
        ContextVectors::new((0..n).map(|i| format!("w{i}")).collect(), ls).unwrap()
    }

    #[test]
    fn one_hot_selects_layer() {
        let cv = random_stack(3, 4, 6, 1);
        for i in 0..3 {
            let out = elmo_pool(&cv, &ScalarMix::one_hot(3, i)).unwrap();
            assert_eq!(&out, cv.layer(i).unwrap());
        }
    }

    #[test]
    fn uniform_mix_is_scaled_mean() {
        let cv = stack(vec![vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0, 7.0, 8.0]], 2);
        let out = elmo_pool(&cv, &ScalarMix::new(vec![0.3, 0.3], 2.0).unwrap()).unwrap();
        assert_eq!(out.data(), &[6.0, 8.0, 10.0, 12.0]);
        assert_eq!(ScalarMix::uniform(3).normalized_weights().unwrap(), vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn hand_computed_two_layer_mix() {
        let mix = ScalarMix::new(vec![0.0, 3f64.ln()], 1.0).unwrap();
        let w = mix.normalized_weights().unwrap();
        assert!((w[0] - 0.25).abs() < 1e-15 && (w[1] - 0.75).abs() < 1e-15);
        let cv = stack(vec![vec![4.0, 4.0], vec![8.0, 8.0]], 1);
        let out = elmo_pool(&cv, &mix).unwrap();
        assert!((out.data()[0] - 7.0).abs() < 1e-12);

        let w = ScalarMix::new(vec![1.0, 2.0], 1.0).unwrap().normalized_weights().unwrap();
        assert!((w[0] - 0.268_941_421_369_995_1).abs() < 1e-12);
        assert!((w[1] - 0.731_058_578_630_004_9).abs() < 1e-12);
    }

    #[test]
    fn invalid_mixes() {
        assert!(ScalarMix::new(vec![0.0], 0.0).is_err());
        assert!(ScalarMix::new(vec![0.0], f64::NAN).is_err());
        assert!(ScalarMix::new(vec![], 1.0).is_err());
        let bad = ScalarMix {
            raw: vec![f64::NAN, 0.0],
            gamma: 1.0,
        };
        assert!(bad.normalized_weights().is_err());
        let cv = random_stack(3, 2, 2, 0);
        assert!(elmo_pool(&cv, &ScalarMix::uniform(2)).is_err());
    }

    #[test]
    fn tape_pool_matches_plain_pool() {
        let cv = random_stack(3, 5, 4, 7);
        let mix = ScalarMix::new(vec![0.2, -1.0, 0.7], 1.3).unwrap();
        let mut store = ParamStore::new();
        let p = ScalarMixParams::new(&mut store, "mix", &mix).unwrap();
        let mut tape = Tape::new(&store);
        let layers: Vec<Var> = cv
            .layers()
            .iter()
            .map(|l| tape.constant(l.clone()).unwrap())
            .collect();
        let out = p.pool(&mut tape, &layers).unwrap();
        let expected = elmo_pool(&cv, &mix).unwrap();
        assert!(tape.value(out).max_abs_diff(&expected) < 1e-14);
        assert_eq!(p.to_mix(&store), mix);
    }

    #[test]
    fn mix_parameters_pass_gradient_check() {
        let cv = random_stack(3, 4, 4, 3);
        let mut store = ParamStore::new();
        let p = ScalarMixParams::new(&mut store, "mix", &ScalarMix::new(vec![0.1, -0.4, 0.6], 0.8).unwrap())
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let target = NDArray::uniform(&[4, 4], 1.0, &mut rng);
        let ids = [p.weights, p.gamma];
        let err = grad_check(&mut store, &ids, 1e-5, |tape| {
            let layers: Vec<Var> = cv
                .layers()
                .iter()
                .map(|l| tape.constant(l.clone()))
                .collect::<Result<_>>()?;
            let pooled = p.pool(tape, &layers)?;
            let t = tape.constant(target.clone())?;
            let prod = tape.mul(pooled, t)?;
            let loss = tape.sum(prod)?;
            let pen = p.l2_penalty(tape, 0.01)?;
            tape.add(loss, pen)
        })
        .unwrap();
        assert!(err <= 1e-4, "{err}");
    }

    proptest! {
        #[test]
        fn shift_invariance(raw in prop::collection::vec(-5.0f64..5.0, 1..6), c in -50.0f64..50.0) {
            let a = ScalarMix::new(raw.clone(), 1.0).unwrap().normalized_weights().unwrap();
            let b = ScalarMix::new(raw.iter().map(|v| v + c).collect(), 1.0).unwrap().normalized_weights().unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(a.iter().all(|&w| w >= 0.0));
        }

        #[test]
        fn pooling_is_linear(seed in 0u64..1000, raw in prop::collection::vec(-2.0f64..2.0, 3), gamma in 0.1f64..3.0) {
            let a = random_stack(3, 3, 4, seed);
            let b = random_stack(3, 3, 4, seed + 1);
            let sum_layers = a.layers().iter().zip(b.layers()).map(|(x, y)| {
                let mut z = x.clone();
                z.add_assign(y);
                z
            }).collect();
            let sum = ContextVectors::new(a.tokens().to_vec(), sum_layers).unwrap();
            let mix = ScalarMix::new(raw, gamma).unwrap();
            let mut lhs = elmo_pool(&a, &mix).unwrap();
            lhs.add_assign(&elmo_pool(&b, &mix).unwrap());
            let rhs = elmo_pool(&sum, &mix).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }
    }
}
