//! Bidirectional language model: vocabulary, joint objective, training,
//! context-vector extraction, persistence and inference timing.

mod checkpoint;
mod context;
mod model;
mod timing;
mod train;
mod unigram;
mod vocab;

pub use checkpoint::{
    checkpoint_bytes, load_checkpoint, load_checkpoint_as, model_from_bytes, save_checkpoint,
    CHECKPOINT_VERSION,
};
pub use context::ContextVectors;
pub use model::{BiLm, BiLmConfig, NllSums, Perplexity};
pub use timing::{timing_report, TimingOptions, TimingRow, TimingTable};
pub use train::{train, MetricsRecord, OptimizerConfig, OptimizerKind, TrainConfig};
pub use unigram::UnigramModel;
pub use vocab::WordVocab;
