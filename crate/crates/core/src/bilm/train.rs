use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{BiLm, NllSums};
use crate::autodiff::{Gradients, ParamStore};
use crate::error::{Error, Result};
use crate::parallel::Execution;
use crate::tensor::NDArray;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// Rescale gradients whose global norm exceeds this value.
    pub clip_norm: Option<f64>,
    /// Steps of linear learning-rate warm-up from zero.
    pub warmup_steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Sgd,
            learning_rate: 0.5,
            clip_norm: Some(5.0),
            warmup_steps: 10,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn adam(learning_rate: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            learning_rate,
            ..Default::default()
        }
    }

    /// Learning rate at 0-based `step`.
    pub fn rate_at(&self, step: usize) -> f64 {
        if self.warmup_steps == 0 {
            self.learning_rate
        } else {
            self.learning_rate * ((step + 1) as f64 / self.warmup_steps as f64).min(1.0)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub log_interval: usize,
    /// Drives batch order and dropout masks.
    pub seed: u64,
    pub optimizer: OptimizerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 200,
            batch_size: 8,
            log_interval: 20,
            seed: 0,
            optimizer: OptimizerConfig::default(),
        }
    }
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: usize,
    pub loss: f64,
    pub ppl_fwd: f64,
    pub ppl_bwd: f64,
    pub lr: f64,
    pub wallclock_ms: u64,
}

impl MetricsRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("metrics serialize")
    }

    /// Equality on everything except elapsed time.
    pub fn same_metrics(&self, other: &MetricsRecord) -> bool {
        self.step == other.step
            && self.loss.to_bits() == other.loss.to_bits()
            && self.ppl_fwd.to_bits() == other.ppl_fwd.to_bits()
            && self.ppl_bwd.to_bits() == other.ppl_bwd.to_bits()
            && self.lr.to_bits() == other.lr.to_bits()
    }
}

struct Optimizer {
    config: OptimizerConfig,
    t: i32,
    moments: Vec<Option<(NDArray, NDArray)>>,
}

impl Optimizer {
    fn new(config: OptimizerConfig, params: &ParamStore) -> Self {
        Optimizer {
            config,
            t: 0,
            moments: vec![None; params.len()],
        }
    }

    fn apply(&mut self, params: &mut ParamStore, mut grads: Gradients, lr: f64) {
        if let Some(max) = self.config.clip_norm {
            let norm = grads.global_norm();
            if norm > max {
                grads.scale(max / norm);
            }
        }
        self.t += 1;
        let c = &self.config;
        for (id, g) in grads.iter() {
            let p = params.get_mut(id).data_mut();
            match c.kind {
                OptimizerKind::Sgd => {
                    for (w, &gv) in p.iter_mut().zip(g.data()) {
                        *w -= lr * gv;
                    }
                }
                OptimizerKind::Adam => {
                    let (m, v) = self.moments[id.index()]
                        .get_or_insert_with(|| (NDArray::zeros(g.shape()), NDArray::zeros(g.shape())));
                    let bc1 = 1.0 - c.beta1.powi(self.t);
                    let bc2 = 1.0 - c.beta2.powi(self.t);
                    for (((w, &gv), mv), vv) in p
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.data_mut())
                        .zip(v.data_mut())
                    {
                        *mv = c.beta1 * *mv + (1.0 - c.beta1) * gv;
                        *vv = c.beta2 * *vv + (1.0 - c.beta2) * gv * gv;
                        let mh = *mv / bc1;
                        let vh = *vv / bc2;
                        *w -= lr * mh / (vh.sqrt() + c.epsilon);
                    }
                }
            }
        }
    }
}

/// Trains `model` in place and returns the metrics log. `on_record` is
/// called as each record is produced. Perplexities in a record come from
/// `valid` when given, else from the training batches since the last record.
pub fn train<S, T, F>(
    model: &mut BiLm,
    corpus: &[T],
    valid: Option<&[T]>,
    config: &TrainConfig,
    exec: Execution,
    mut on_record: F,
) -> Result<Vec<MetricsRecord>>
where
    S: AsRef<str> + Sync,
    T: AsRef<[S]> + Sync,
    F: FnMut(&MetricsRecord),
{
    if corpus.is_empty() {
        return Err(Error::Empty("training corpus"));
    }
    if config.batch_size == 0 || config.log_interval == 0 {
        return Err(Error::Config("batch size and log interval must be >= 1".into()));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;

    let mut optimizer = Optimizer::new(config.optimizer.clone(), model.params());
    let mut log = Vec::new();
    let mut interval = NllSums::default();
    let mut interval_loss = 0.0;
    let mut interval_steps = 0;

    for step in 0..config.steps {
        let mut batch = Vec::with_capacity(config.batch_size);
        while batch.len() < config.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(&corpus[order[cursor]]);
            cursor += 1;
        }
        let batch: Vec<&[S]> = batch.into_iter().map(|s| s.as_ref()).collect();
        let dropout_seed = config.seed ^ ((step as u64 + 1) << 20);
        let (sums, grads) = model
            .loss_and_gradients(&batch, Some(dropout_seed), exec)
            .map_err(|e| match e {
                Error::NonFinite { .. } => Error::Divergence {
                    step,
                    loss: f64::NAN,
                },
                other => other,
            })?;
        let loss = sums.joint_loss();
        if !loss.is_finite() {
            return Err(Error::Divergence { step, loss });
        }
        let lr = config.optimizer.rate_at(step);
        optimizer.apply(model.params_mut(), grads, lr);
        if !model.params().iter().all(|(_, _, v)| v.all_finite()) {
            return Err(Error::Divergence {
                step,
                loss: f64::NAN,
            });
        }

        interval.add(sums);
        interval_loss += loss;
        interval_steps += 1;
        if (step + 1) % config.log_interval == 0 || step + 1 == config.steps {
            let ppl = match valid {
                Some(v) => model.perplexity(v, exec)?,
                None => interval.perplexity(),
            };
            let record = MetricsRecord {
                step: step + 1,
                loss: interval_loss / interval_steps as f64,
                ppl_fwd: ppl.forward,
                ppl_bwd: ppl.backward,
                lr,
                wallclock_ms: start.elapsed().as_millis() as u64,
            };
            on_record(&record);
            log.push(record);
            interval = NllSums::default();
            interval_loss = 0.0;
            interval_steps = 0;
        }
    }
    Ok(log)
}
