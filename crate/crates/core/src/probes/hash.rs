use std::collections::BTreeMap;
use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::data_io::WordVectors;
use crate::error::{Error, Result};

pub const HASH_DIM: usize = 300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HashFunction {
    /// 64-bit FNV-1a over the seed's little-endian bytes followed by the
    /// UTF-8 bytes of the n-gram.
    Fnv1a64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashVectorConfig {
    pub orders: Vec<usize>,
    pub dim: usize,
    pub function: HashFunction,
    pub seed: u64,
}

impl Default for HashVectorConfig {
    fn default() -> Self {
        HashVectorConfig {
            orders: vec![1, 2, 3],
            dim: HASH_DIM,
            function: HashFunction::Fnv1a64,
            seed: 0,
        }
    }
}

impl HashVectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim != HASH_DIM {
            return Err(Error::Config(format!("hash dimension must be {HASH_DIM}, got {}", self.dim)));
        }
        if self.orders.is_empty() || self.orders.contains(&0) {
            return Err(Error::Config("n-gram orders must be positive".into()));
        }
        Ok(())
    }

    fn bucket(&self, gram: &str) -> usize {
        match self.function {
            HashFunction::Fnv1a64 => {
                let mut h = FnvHasher::default();
                h.write(&self.seed.to_le_bytes());
                h.write(gram.as_bytes());
                (h.finish() % self.dim as u64) as usize
            }
        }
    }
}

/// Count vector stored as bucket → count.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub entries: BTreeMap<usize, f64>,
}

impl SparseVector {
    pub fn get(&self, i: usize) -> f64 {
        self.entries.get(&i).copied().unwrap_or(0.0)
    }

    pub fn mass(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (&i, &v) in &self.entries {
            out[i] = v;
        }
        out
    }
}

/// Counts of the hashed character n-grams of `word`.
pub fn ngram_hash_vector(word: &str, config: &HashVectorConfig) -> SparseVector {
    let chars: Vec<char> = word.chars().collect();
    let mut out = SparseVector {
        dim: config.dim,
        entries: BTreeMap::new(),
    };
    for &n in &config.orders {
        for w in chars.windows(n) {
            let gram: String = w.iter().collect();
            *out.entries.entry(config.bucket(&gram)).or_insert(0.0) += 1.0;
        }
    }
    out
}

/// Dense hash vectors for `words`, in first-occurrence order.
pub fn hash_word_vectors<'a, I>(words: I, config: &HashVectorConfig) -> Result<WordVectors>
where
    I: IntoIterator<Item = &'a str>,
{
    config.validate()?;
    let mut out = WordVectors::new();
    for w in words {
        if w.is_empty() || out.get(w).is_some() {
            continue;
        }
        out.insert(w, ngram_hash_vector(w, config).to_dense())?;
    }
    Ok(out)
}
