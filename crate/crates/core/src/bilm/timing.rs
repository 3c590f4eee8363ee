use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::model::BiLm;
use crate::error::{Error, Result};
use crate::parallel::{self, Execution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub batch_size: usize,
    /// Median milliseconds for the contextual layers alone.
    pub contextual_ms: f64,
    /// Median milliseconds for the character encoder plus contextual layers.
    pub all_layers_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingTable {
    pub architecture: String,
    pub runs: usize,
    pub rows: Vec<TimingRow>,
}

impl TimingTable {
    pub fn row(&self, batch_size: usize) -> Option<&TimingRow> {
        self.rows.iter().find(|r| r.batch_size == batch_size)
    }

    /// Column headers in the order of [`TimingTable::values`].
    pub fn columns(&self) -> Vec<String> {
        self.rows
            .iter()
            .flat_map(|r| {
                [
                    format!("contextual_b{}", r.batch_size),
                    format!("all_layers_b{}", r.batch_size),
                ]
            })
            .collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows
            .iter()
            .flat_map(|r| [r.contextual_ms, r.all_layers_ms])
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TimingOptions {
    pub runs: usize,
    pub warmup: usize,
    pub exec: Execution,
}

impl Default for TimingOptions {
    fn default() -> Self {
        TimingOptions {
            runs: 20,
            warmup: 2,
            exec: Execution::Sequential,
        }
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Per-batch inference latency. Each run times the character encoder and the
/// contextual layers as consecutive phases, so the contextual figure is a
/// subset of the all-layers figure. Batches cycle through `sentences`.
pub fn timing_report<S: AsRef<str> + Sync>(
    model: &BiLm,
    sentences: &[Vec<S>],
    batch_sizes: &[usize],
    options: TimingOptions,
) -> Result<TimingTable> {
    if sentences.is_empty() {
        return Err(Error::Empty("timing sentences"));
    }
    if options.runs == 0 || batch_sizes.contains(&0) {
        return Err(Error::Config("runs and batch sizes must be >= 1".into()));
    }
    let mut rows = Vec::with_capacity(batch_sizes.len());
    for &b in batch_sizes {
        let batch: Vec<Vec<&str>> = (0..b)
            .map(|i| BiLm::wrap_owned(&sentences[i % sentences.len()]))
            .collect();
        let mut contextual = Vec::with_capacity(options.runs);
        let mut all = Vec::with_capacity(options.runs);
        for run in 0..options.warmup + options.runs {
            let t0 = Instant::now();
            let words = parallel::try_map(&batch, options.exec, |s| model.word_layer(s))?;
            let t1 = Instant::now();
            let ctx = parallel::try_map(&words, options.exec, |x| model.contextual_layers(x))?;
            let t2 = Instant::now();
            std::hint::black_box(ctx);
            if run >= options.warmup {
                contextual.push((t2 - t1).as_secs_f64() * 1e3);
                all.push((t2 - t0).as_secs_f64() * 1e3);
            }
        }
        rows.push(TimingRow {
            batch_size: b,
            contextual_ms: median(contextual),
            all_layers_ms: median(all),
        });
    }
    Ok(TimingTable {
        architecture: model.config().arch.kind().to_string(),
        runs: options.runs,
        rows,
    })
}
