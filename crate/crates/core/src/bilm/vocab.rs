use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Word inventory for the softmax, with reserved sentence-boundary and
/// unknown ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordVocab {
    tokens: Vec<String>,
    counts: Vec<u64>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl WordVocab {
    pub const BOS: usize = 0;
    pub const EOS: usize = 1;
    pub const UNK: usize = 2;
    pub const BOS_TOKEN: &'static str = "<S>";
    pub const EOS_TOKEN: &'static str = "</S>";
    pub const UNK_TOKEN: &'static str = "<UNK>";

    /// Counts tokens and keeps those seen at least `min_count` times, most
    /// frequent first (ties by string), capped at `max_size` real tokens.
    pub fn build<S: AsRef<str>>(
        sentences: &[Vec<S>],
        max_size: Option<usize>,
        min_count: u64,
    ) -> Result<Self> {
        if sentences.is_empty() {
            return Err(Error::Empty("corpus"));
        }
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for s in sentences {
            for t in s {
                *freq.entry(t.as_ref()).or_default() += 1;
            }
        }
        let mut entries: Vec<(&str, u64)> = freq
            .into_iter()
            .filter(|&(t, c)| c >= min_count.max(1) && !Self::is_reserved(t))
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        if let Some(m) = max_size {
            entries.truncate(m);
        }
        let n = sentences.len() as u64;
        let kept: u64 = entries.iter().map(|e| e.1).sum();
        let total: u64 = sentences.iter().map(|s| s.len() as u64).sum();
        let mut tokens = vec![
            Self::BOS_TOKEN.to_string(),
            Self::EOS_TOKEN.to_string(),
            Self::UNK_TOKEN.to_string(),
        ];
        let mut counts = vec![n, n, (total - kept).max(1)];
        for (t, c) in entries {
            tokens.push(t.to_string());
            counts.push(c);
        }
        Ok(Self::from_parts(tokens, counts))
    }

    pub(crate) fn from_parts(tokens: Vec<String>, counts: Vec<u64>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        WordVocab {
            tokens,
            counts,
            index,
        }
    }

    pub(crate) fn reindex(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    fn is_reserved(t: &str) -> bool {
        t == Self::BOS_TOKEN || t == Self::EOS_TOKEN || t == Self::UNK_TOKEN
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(Self::UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}
