//! Analysis suite over context vectors: similarity, span representations,
//! linear POS and constituency probes with tree decoding, unsupervised
//! pronominal coreference, and word analogies with hashed n-gram vectors.

mod analogy;
mod coref;
mod f1;
mod features;
mod hash;
mod linear;
mod parse;
mod pos;
mod similarity;
mod span;

pub use analogy::{analogy_eval, AnalogyConfig, AnalogyReport, ClassScore};
pub use coref::{
    coref_adjust, coref_baseline, coref_resolve, evaluate_baseline, evaluate_coref,
    AdjustedVector, CorefBaseline, CorefScore,
};
pub use f1::{bracketing_f1, F1Score};
pub use features::{token_features, LayerSelection};
pub use hash::{
    hash_word_vectors, ngram_hash_vector, HashFunction, HashVectorConfig, SparseVector, HASH_DIM,
};
pub use linear::{
    probe_accuracy, train_linear_probe, ColumnScaling, LinearProbe, ProbeConfig, ProbeParams,
};
pub use parse::{
    compare_decoders, decode_tree, eval_span_probe, exhaustive_decode, score_all_spans,
    span_features, train_span_probe, DecodeComparison, SpanScores, NULL_LABEL,
};
pub use pos::{eval_pos_probe, train_pos_probe};
pub use similarity::similarity_matrix;
pub use span::{all_spans, labeled_span_vectors, span_matrix, span_representation, SpanRep};
