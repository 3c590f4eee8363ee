use super::vocab::WordVocab;
use crate::error::{Error, Result};

/// Add-one smoothed unigram model over the softmax vocabulary, estimated
/// from the prediction targets of a training corpus (each token plus one
/// sentence boundary per sentence).
#[derive(Clone, Debug, PartialEq)]
pub struct UnigramModel {
    log_probs: Vec<f64>,
}

impl UnigramModel {
    pub fn fit<S: AsRef<str>, T: AsRef<[S]>>(vocab: &WordVocab, corpus: &[T]) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Empty("corpus"));
        }
        let mut counts = vec![1.0; vocab.len()];
        for s in corpus {
            for t in s.as_ref() {
                counts[vocab.id(t.as_ref())] += 1.0;
            }
            counts[WordVocab::EOS] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        Ok(UnigramModel {
            log_probs: counts.iter().map(|c| (c / total).ln()).collect(),
        })
    }

    /// Per-token perplexity of the forward targets. The backward targets
    /// swap the end boundary for the start boundary, which this model
    /// scores identically, so the value serves both directions.
    pub fn perplexity<S: AsRef<str>, T: AsRef<[S]>>(&self, vocab: &WordVocab, corpus: &[T]) -> Result<f64> {
        if corpus.is_empty() {
            return Err(Error::Empty("corpus"));
        }
        let mut nll = 0.0;
        let mut n = 0usize;
        for s in corpus {
            for t in s.as_ref() {
                nll -= self.log_probs[vocab.id(t.as_ref())];
                n += 1;
            }
            nll -= self.log_probs[WordVocab::EOS];
            n += 1;
        }
        Ok((nll / n as f64).exp())
    }
}
