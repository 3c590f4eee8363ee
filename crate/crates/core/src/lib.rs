//! Bidirectional language models under three contextual architectures
//! (LSTM with projection, causally masked Transformer, gated causal CNN),
//! plus a suite of probes for the representations they learn.

pub mod autodiff;
pub mod bilm;
pub mod char_encoder;
mod codec;
pub mod data_io;
pub mod elmo;
pub mod encoders;
pub mod error;
pub mod nn;
pub mod parallel;
pub mod probes;
pub mod synthetic;
pub mod tensor;

pub use bilm::{BiLm, BiLmConfig, ContextVectors};
pub use error::{Error, Result};
pub use tensor::NDArray;
