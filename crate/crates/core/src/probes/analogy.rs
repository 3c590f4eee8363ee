use serde::{Deserialize, Serialize};

use crate::data_io::{AnalogyClass, AnalogyItem, WordVectors};
use crate::error::{Error, Result};
use crate::parallel::{self, Execution};
use crate::tensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AnalogyConfig {
    /// Only the first `k` words of the vector file are searched and
    /// accepted as query words.
    pub restrict_vocab: Option<usize>,
    pub exec: Execution,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

impl ClassScore {
    fn new(correct: usize, total: usize) -> Self {
        let accuracy = if total == 0 { 0.0 } else { correct as f64 / total as f64 };
        ClassScore {
            correct,
            total,
            accuracy,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalogyReport {
    pub syntactic: ClassScore,
    pub semantic: ClassScore,
    pub overall: ClassScore,
    /// Items with a word outside the searched vocabulary.
    pub skipped: usize,
}

/// 3CosAdd over length-normalized vectors: the answer is the word whose
/// vector has the highest cosine with `b − a + c`, excluding the three
/// query words. Ties go to the earlier word.
pub fn analogy_eval(
    vectors: &WordVectors,
    items: &[AnalogyItem],
    config: &AnalogyConfig,
) -> Result<AnalogyReport> {
    let vocab = config.restrict_vocab.unwrap_or(usize::MAX).min(vectors.len());
    let dim = vectors.dim();
    let mut unit = Vec::with_capacity(vocab * dim);
    for i in 0..vocab {
        let v = vectors.vector(i);
        let n = tensor::norm(v);
        unit.extend(v.iter().map(|x| if n > 0.0 { x / n } else { 0.0 }));
    }
    let row = |i: usize| &unit[i * dim..(i + 1) * dim];
    let lookup = |w: &str| vectors.index_of(w).filter(|&i| i < vocab);

    let outcomes = parallel::map(items, config.exec, |item| {
        let ids: Option<Vec<usize>> = item.words().iter().map(|w| lookup(w)).collect();
        let ids = ids?;
        let (a, b, c, d) = (ids[0], ids[1], ids[2], ids[3]);
        let query: Vec<f64> = (0..dim)
            .map(|k| row(b)[k] - row(a)[k] + row(c)[k])
            .collect();
        let mut best: Option<(usize, f64)> = None;
        for w in 0..vocab {
            if w == a || w == b || w == c {
                continue;
            }
            let s = tensor::dot(&query, row(w));
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((w, s));
            }
        }
        Some(best.is_some_and(|(w, _)| w == d))
    });

    let mut counts = [(0usize, 0usize); 2];
    let mut skipped = 0;
    for (item, outcome) in items.iter().zip(&outcomes) {
        let slot = &mut counts[usize::from(item.class == AnalogyClass::Syntactic)];
        match outcome {
            Some(ok) => {
                slot.1 += 1;
                slot.0 += usize::from(*ok);
            }
            None => skipped += 1,
        }
    }
    let total = counts[0].1 + counts[1].1;
    if total == 0 {
        return Err(Error::Empty("analogy items covered by the vocabulary"));
    }
    if skipped > 0 {
        log::info!("analogy_eval: skipped {skipped} of {} items", items.len());
    }
    Ok(AnalogyReport {
        semantic: ClassScore::new(counts[0].0, counts[0].1),
        syntactic: ClassScore::new(counts[1].0, counts[1].1),
        overall: ClassScore::new(counts[0].0 + counts[1].0, total),
        skipped,
    })
}
