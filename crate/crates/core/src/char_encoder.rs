//! Context-insensitive, character-aware word embeddings.
//!
//! Each word is wrapped in begin/end-of-word markers, its characters are
//! embedded, convolved with n-gram filters of several widths, max-pooled over
//! positions, passed through highway layers and projected to the model
//! dimension. A row depends only on the spelling of its word.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::nn::Linear;
use crate::tensor::NDArray;

/// Character inventory with four reserved ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharVocab {
    chars: Vec<char>,
    #[serde(skip)]
    index: BTreeMap<char, usize>,
}

impl CharVocab {
    pub const PAD: usize = 0;
    pub const BOW: usize = 1;
    pub const EOW: usize = 2;
    pub const UNK: usize = 3;
    pub const RESERVED: usize = 4;

    /// Collects every character of `corpus`, ordered by codepoint.
    pub fn build<'a, I>(corpus: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut seen = BTreeSet::new();
        let mut any = false;
        for text in corpus {
            any |= !text.is_empty();
            seen.extend(text.chars().filter(|c| !c.is_whitespace()));
        }
        if !any || seen.is_empty() {
            return Err(Error::Empty("character corpus"));
        }
        Ok(Self::from_chars(seen.into_iter().collect()))
    }

    pub fn from_chars(chars: Vec<char>) -> Self {
        let index = chars
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i + Self::RESERVED))
            .collect();
        CharVocab { chars, index }
    }

    /// Rebuilds the lookup index after deserialization.
    pub(crate) fn reindex(&mut self) {
        *self = Self::from_chars(std::mem::take(&mut self.chars));
    }

    pub fn len(&self) -> usize {
        self.chars.len() + Self::RESERVED
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, c: char) -> usize {
        self.index.get(&c).copied().unwrap_or(Self::UNK)
    }

    /// The character for a non-reserved id.
    pub fn char_of(&self, id: usize) -> Option<char> {
        id.checked_sub(Self::RESERVED)
            .and_then(|i| self.chars.get(i))
            .copied()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    /// `[BOW, c_1, ..., c_m, EOW]` with at most `max_chars` ids in total.
    pub fn encode_word(&self, word: &str, max_chars: usize) -> Vec<usize> {
        let keep = max_chars.saturating_sub(2);
        let mut ids = Vec::with_capacity(keep + 2);
        ids.push(Self::BOW);
        ids.extend(word.chars().take(keep).map(|c| self.id(c)));
        ids.push(Self::EOW);
        ids
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharEncoderConfig {
    pub char_dim: usize,
    /// `(width, count)` per filter bank.
    pub filters: Vec<(usize, usize)>,
    pub highway_layers: usize,
    pub output_dim: usize,
    pub max_chars: usize,
    /// Project filter outputs to `output_dim` before the highway layers
    /// instead of after them.
    #[serde(default)]
    pub project_before_highway: bool,
}

impl CharEncoderConfig {
    pub fn desk(output_dim: usize) -> Self {
        CharEncoderConfig {
            char_dim: 16,
            filters: vec![(1, 16), (2, 16), (3, 32), (4, 32), (5, 32)],
            highway_layers: 2,
            output_dim,
            max_chars: 50,
            project_before_highway: false,
        }
    }

    /// 2048 filters, two highway layers, 512-dim output.
    pub fn full() -> Self {
        CharEncoderConfig {
            char_dim: 16,
            filters: vec![
                (1, 32),
                (2, 32),
                (3, 64),
                (4, 128),
                (5, 256),
                (6, 512),
                (7, 1024),
            ],
            highway_layers: 2,
            output_dim: 512,
            max_chars: 50,
            project_before_highway: false,
        }
    }

    pub fn filter_total(&self) -> usize {
        self.filters.iter().map(|&(_, n)| n).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("char encoder: {m}")));
        if self.char_dim == 0 || self.output_dim == 0 {
            return bad("dimensions must be >= 1");
        }
        if self.filters.is_empty() {
            return bad("at least one filter bank required");
        }
        if self.filters.iter().any(|&(w, n)| w == 0 || n == 0) {
            return bad("filter widths and counts must be >= 1");
        }
        if self.max_chars < 3 {
            return bad("max_chars must leave room for one character and two markers");
        }
        Ok(())
    }
}

/// One highway layer: `g * relu(x W_t + b_t) + (1 - g) * x` with
/// `g = sigmoid(x W_g + b_g)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Highway {
    pub transform: Linear,
    pub gate: Linear,
}

impl Highway {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, dim: usize, rng: &mut R) -> Self {
        let transform = Linear::new(store, &format!("{name}.transform"), dim, dim, true, rng);
        let gate = Linear::new(store, &format!("{name}.gate"), dim, dim, true, rng);
        if let Some(b) = gate.bias {
            *store.get_mut(b) = NDArray::full(&[1, dim], -1.0);
        }
        Highway { transform, gate }
    }
}

/// Applies one highway layer to the rows of `x`.
pub fn highway(tape: &mut Tape, x: Var, layer: &Highway) -> Result<Var> {
    let t = layer.transform.forward(tape, x)?;
    let t = tape.relu(t)?;
    let g = layer.gate.forward(tape, x)?;
    let g = tape.sigmoid(g)?;
    let delta = tape.sub(t, x)?;
    let gated = tape.mul(g, delta)?;
    tape.add(x, gated)
}

#[derive(Clone, Debug, PartialEq)]
struct FilterBank {
    width: usize,
    kernel: ParamId,
    bias: ParamId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CharEncoder {
    config: CharEncoderConfig,
    embedding: ParamId,
    filters: Vec<FilterBank>,
    highways: Vec<Highway>,
    projection: Linear,
}

impl CharEncoder {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        config: &CharEncoderConfig,
        vocab_size: usize,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let embedding = store.add(
            "char.embedding",
            NDArray::uniform(&[vocab_size, config.char_dim], 1.0, rng),
        );
        let filters = config
            .filters
            .iter()
            .enumerate()
            .map(|(i, &(width, count))| {
                let fan_in = width * config.char_dim;
                FilterBank {
                    width,
                    kernel: store.add(
                        format!("char.conv{i}.kernel"),
                        NDArray::uniform(&[fan_in, count], 1.0 / (fan_in as f64).sqrt(), rng),
                    ),
                    bias: store.add(format!("char.conv{i}.bias"), NDArray::zeros(&[1, count])),
                }
            })
            .collect();
        let total = config.filter_total();
        let (projection, highways) = if config.project_before_highway {
            let p = Linear::new(store, "char.projection", total, config.output_dim, false, rng);
            let h = (0..config.highway_layers)
                .map(|i| Highway::new(store, &format!("char.highway{i}"), config.output_dim, rng))
                .collect();
            (p, h)
        } else {
            let h: Vec<_> = (0..config.highway_layers)
                .map(|i| Highway::new(store, &format!("char.highway{i}"), total, rng))
                .collect();
            let p = Linear::new(store, "char.projection", total, config.output_dim, false, rng);
            (p, h)
        };
        Ok(CharEncoder {
            config: config.clone(),
            embedding,
            filters,
            highways,
            projection,
        })
    }

    pub fn config(&self) -> &CharEncoderConfig {
        &self.config
    }

    pub fn embedding(&self) -> ParamId {
        self.embedding
    }

    pub fn highways(&self) -> &[Highway] {
        &self.highways
    }

    pub fn projection(&self) -> &Linear {
        &self.projection
    }

    /// `(kernel, bias)` of filter bank `i`.
    pub fn filter_params(&self, i: usize) -> (ParamId, ParamId) {
        (self.filters[i].kernel, self.filters[i].bias)
    }

    /// Pooled filter outputs for one word: `[1, total filters]`.
    fn pooled(&self, tape: &mut Tape, vocab: &CharVocab, word: &str) -> Result<Var> {
        let ids = vocab.encode_word(word, self.config.max_chars);
        let table = tape.param(self.embedding);
        let chars = tape.gather(table, &ids)?;
        let mut pooled = Vec::with_capacity(self.filters.len());
        for bank in &self.filters {
            let resp = self.bank_response(tape, chars, ids.len(), bank)?;
            pooled.push(tape.max_rows(resp)?);
        }
        tape.concat_cols(&pooled)
    }

    fn bank_response(
        &self,
        tape: &mut Tape,
        chars: Var,
        len: usize,
        bank: &FilterBank,
    ) -> Result<Var> {
        let pad = bank.width.saturating_sub(len);
        let win = tape.windows(chars, bank.width, 0, pad)?;
        let k = tape.param(bank.kernel);
        let b = tape.param(bank.bias);
        let y = tape.matmul(win, k)?;
        let y = tape.add(y, b)?;
        tape.relu(y)
    }

    /// Post-activation responses of filter bank `bank` at every window of
    /// `word` (including markers), before max pooling: `[windows, count]`.
    pub fn filter_responses(
        &self,
        store: &ParamStore,
        vocab: &CharVocab,
        word: &str,
        bank: usize,
    ) -> Result<NDArray> {
        let bank = self
            .filters
            .get(bank)
            .ok_or_else(|| Error::OutOfRange(format!("filter bank {bank}")))?;
        let mut tape = Tape::new(store);
        let ids = vocab.encode_word(word, self.config.max_chars);
        let table = tape.param(self.embedding);
        let chars = tape.gather(table, &ids)?;
        let r = self.bank_response(&mut tape, chars, ids.len(), bank)?;
        Ok(tape.value(r).clone())
    }

    /// Embeds `tokens` as rows of an `[N, output_dim]` matrix.
    pub fn encode(&self, tape: &mut Tape, vocab: &CharVocab, tokens: &[&str]) -> Result<Var> {
        if tokens.is_empty() {
            return Err(Error::Empty("token list"));
        }
        if tokens.iter().any(|t| t.is_empty()) {
            return Err(Error::Empty("token"));
        }
        // Each distinct spelling is encoded once and rows are gathered back.
        let mut unique: BTreeMap<&str, usize> = BTreeMap::new();
        let mut order = Vec::new();
        let row_of: Vec<usize> = tokens
            .iter()
            .map(|&t| {
                *unique.entry(t).or_insert_with(|| {
                    order.push(t);
                    order.len() - 1
                })
            })
            .collect();
        let mut rows = Vec::with_capacity(order.len());
        for w in &order {
            rows.push(self.pooled(tape, vocab, w)?);
        }
        let mut h = tape.concat_rows(&rows)?;
        if self.config.project_before_highway {
            h = self.projection.forward(tape, h)?;
            for layer in &self.highways {
                h = highway(tape, h, layer)?;
            }
        } else {
            for layer in &self.highways {
                h = highway(tape, h, layer)?;
            }
            h = self.projection.forward(tape, h)?;
        }
        tape.gather(h, &row_of)
    }
}

/// Embeds `tokens` outside of any training tape.
pub fn encode_words(
    encoder: &CharEncoder,
    store: &ParamStore,
    vocab: &CharVocab,
    tokens: &[&str],
) -> Result<NDArray> {
    let mut tape = Tape::new(store);
    let v = encoder.encode(&mut tape, vocab, tokens)?;
    Ok(tape.value(v).clone())
}
