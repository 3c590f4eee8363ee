use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{BiLm, BiLmConfig};
use super::vocab::WordVocab;
use crate::char_encoder::CharVocab;
use crate::codec::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::tensor::NDArray;

const MAGIC: &[u8; 4] = b"BLMC";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Serialize, Deserialize)]
struct VocabBlock {
    words: WordVocab,
    chars: CharVocab,
}

pub fn checkpoint_bytes(model: &BiLm) -> Result<Vec<u8>> {
    let mut w = ByteWriter::new(MAGIC, CHECKPOINT_VERSION);
    w.len_prefixed(serde_json::to_string(model.config())?.as_bytes())?;
    let vocab = VocabBlock {
        words: model.words().clone(),
        chars: model.chars().clone(),
    };
    w.len_prefixed(serde_json::to_string(&vocab)?.as_bytes())?;
    for (_, _, value) in model.params().iter() {
        for &v in value.data() {
            w.f64(v);
        }
    }
    Ok(w.finish())
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<BiLm> {
    let mut r = ByteReader::open(bytes, MAGIC, CHECKPOINT_VERSION)?;
    let config: BiLmConfig = serde_json::from_slice(r.len_prefixed()?)?;
    let VocabBlock {
        mut words,
        mut chars,
    } = serde_json::from_slice(r.len_prefixed()?)?;
    words.reindex();
    chars.reindex();
    let mut model = BiLm::new(config, words, chars)?;
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        let shape = model.params().get(id).shape().to_vec();
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(r.f64()?);
        }
        model.params_mut().set(id, NDArray::new(shape, data)?)?;
    }
    r.finish()?;
    Ok(model)
}

pub fn save_checkpoint(model: &BiLm, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, checkpoint_bytes(model)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<BiLm> {
    model_from_bytes(&fs::read(path)?)
}

/// Loads a checkpoint, failing unless it holds the `expected` architecture
/// kind (`"lstm_proj"`, `"transformer"` or `"gated_cnn"`).
pub fn load_checkpoint_as(path: impl AsRef<Path>, expected: &str) -> Result<BiLm> {
    let model = load_checkpoint(path)?;
    let found = model.config().arch.kind();
    if found != expected {
        return Err(Error::ArchitectureMismatch {
            requested: expected.to_string(),
            found: found.to_string(),
        });
    }
    Ok(model)
}
