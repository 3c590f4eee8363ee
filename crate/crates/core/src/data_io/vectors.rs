use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// Dense word vectors keyed by word, in file order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WordVectors {
    words: Vec<String>,
    vectors: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
    /// Later occurrences of an already-seen word, which were dropped.
    pub duplicates: usize,
}

impl WordVectors {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a vector, keeping the first occurrence of a repeated word.
    /// Returns false when the word was already present.
    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<bool> {
        let word = word.into();
        if let Some(d) = self.vectors.first().map(Vec::len) {
            if vector.len() != d {
                return Err(Error::shape(
                    "word_vectors",
                    format!("'{word}' has {} dims, expected {d}", vector.len()),
                ));
            }
        }
        if self.index.contains_key(&word) {
            self.duplicates += 1;
            return Ok(false);
        }
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.vectors.push(vector);
        Ok(true)
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| self.vectors[i].as_slice())
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i]
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }
}

impl FromIterator<(String, Vec<f64>)> for WordVectors {
    /// Panics on inconsistent dimensions.
    fn from_iter<I: IntoIterator<Item = (String, Vec<f64>)>>(iter: I) -> Self {
        let mut out = WordVectors::new();
        for (w, v) in iter {
            out.insert(w, v).expect("consistent dimensions");
        }
        out
    }
}

/// Text format: a word followed by its components on each line. A leading
/// `count dim` header line is accepted and skipped.
pub fn load_word_vectors(path: impl AsRef<Path>) -> Result<WordVectors> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut out = WordVectors::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        if i == 0 && rest.len() == 1 && word.parse::<usize>().is_ok() && rest[0].parse::<usize>().is_ok() {
            continue;
        }
        let vector = rest
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, i + 1, format!("bad component: {e}")))?;
        if vector.is_empty() {
            return Err(Error::parse(path, i + 1, "word without components"));
        }
        if out.dim() != 0 && vector.len() != out.dim() {
            return Err(Error::parse(
                path,
                i + 1,
                format!("ragged line: {} components, expected {}", vector.len(), out.dim()),
            ));
        }
        if !out.insert(word, vector)? {
            log::warn!("{}:{}: duplicate word '{word}' ignored", path.display(), i + 1);
        }
    }
    Ok(out)
}
