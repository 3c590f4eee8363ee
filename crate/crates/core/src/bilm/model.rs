use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::context::ContextVectors;
use super::vocab::WordVocab;
use crate::autodiff::{Gradients, ParamStore, Tape, Var};
use crate::char_encoder::{CharEncoder, CharEncoderConfig, CharVocab};
use crate::encoders::{ContextualStack, Direction, DropoutRng, EncoderArch};
use crate::error::{Error, Result};
use crate::nn::Linear;
use crate::parallel::{self, Execution};
use crate::tensor::NDArray;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiLmConfig {
    pub char_encoder: CharEncoderConfig,
    pub arch: EncoderArch,
    /// Seed for parameter initialization.
    pub seed: u64,
}

impl BiLmConfig {
    pub fn new(char_encoder: CharEncoderConfig, arch: EncoderArch) -> Self {
        BiLmConfig {
            char_encoder,
            arch,
            seed: 0,
        }
    }

    /// Looks up a named preset: `desk-*` and `tiny-*` for toy corpora,
    /// `full-*` for the full-size configurations, where `*` is one of
    /// `lstm`, `transformer`, `cnn` (plus `full-lstm4`).
    pub fn preset(name: &str) -> Option<Self> {
        let (scale, arch) = name.split_once('-')?;
        let arch = match (scale, arch) {
            ("desk", "lstm") => EncoderArch::desk_lstm(),
            ("desk", "transformer") => EncoderArch::desk_transformer(),
            ("desk", "cnn") => EncoderArch::desk_gated_cnn(),
            ("tiny", "lstm") => EncoderArch::LstmProj {
                layers: 2,
                hidden_dim: 64,
                projection_dim: 32,
            },
            ("tiny", "transformer") => EncoderArch::Transformer {
                layers: 2,
                heads: 4,
                model_dim: 32,
                ff_dim: 64,
                dropout: 0.0,
                max_len: 256,
            },
            ("tiny", "cnn") => EncoderArch::GatedCnn {
                blocks: vec![(3, 32); 4],
                dropout: 0.0,
            },
            ("full", "lstm") => EncoderArch::full_lstm_2layer(),
            ("full", "lstm4") => EncoderArch::full_lstm_4layer(),
            ("full", "transformer") => EncoderArch::full_transformer(),
            ("full", "cnn") => EncoderArch::full_gated_cnn(),
            _ => return None,
        };
        let mut chars = match scale {
            "full" => CharEncoderConfig::full(),
            "tiny" => CharEncoderConfig {
                char_dim: 8,
                filters: vec![(1, 16), (2, 16), (3, 32)],
                highway_layers: 1,
                output_dim: arch.model_dim(),
                max_chars: 50,
                project_before_highway: false,
            },
            _ => CharEncoderConfig::desk(arch.model_dim()),
        };
        chars.output_dim = arch.model_dim();
        chars.project_before_highway = arch == EncoderArch::full_lstm_4layer();
        Some(BiLmConfig::new(chars, arch))
    }

    pub fn model_dim(&self) -> usize {
        self.arch.model_dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.char_encoder.validate()?;
        self.arch.validate()?;
        let d = self.arch.model_dim();
        if self.char_encoder.output_dim != d {
            return Err(Error::Config(format!(
                "char encoder output dim {} differs from model dim {d}",
                self.char_encoder.output_dim
            )));
        }
        if let EncoderArch::GatedCnn { blocks, .. } = &self.arch {
            if blocks.iter().any(|&(_, c)| c != d) {
                return Err(Error::Config(
                    "every gated CNN block must emit the model dim so layers can be stacked"
                        .into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perplexity {
    pub forward: f64,
    pub backward: f64,
    pub average: f64,
}

/// Summed directional negative log-likelihoods over a batch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NllSums {
    pub forward: f64,
    pub backward: f64,
    /// Predictions per direction.
    pub tokens: usize,
}

impl NllSums {
    pub fn add(&mut self, other: NllSums) {
        self.forward += other.forward;
        self.backward += other.backward;
        self.tokens += other.tokens;
    }

    /// Mean over tokens and both directions.
    pub fn joint_loss(&self) -> f64 {
        (self.forward + self.backward) / (2.0 * self.tokens as f64)
    }

    pub fn perplexity(&self) -> Perplexity {
        let n = self.tokens as f64;
        let forward = (self.forward / n).exp();
        let backward = (self.backward / n).exp();
        Perplexity {
            forward,
            backward,
            average: 0.5 * (forward + backward),
        }
    }
}

struct Encoded {
    x: Var,
    forward: Vec<Var>,
    backward: Vec<Var>,
}

/// Character encoder and softmax shared by both directions, with separate
/// forward and backward contextual stacks.
#[derive(Clone, Debug, PartialEq)]
pub struct BiLm {
    config: BiLmConfig,
    words: WordVocab,
    chars: CharVocab,
    params: ParamStore,
    char_encoder: CharEncoder,
    forward: ContextualStack,
    backward: ContextualStack,
    softmax: Linear,
}

impl BiLm {
    pub fn new(config: BiLmConfig, words: WordVocab, chars: CharVocab) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamStore::new();
        let d = config.model_dim();
        let char_encoder = CharEncoder::new(&mut params, &config.char_encoder, chars.len(), &mut rng)?;
        let forward = ContextualStack::new(&mut params, "forward", &config.arch, d, &mut rng)?;
        let backward = ContextualStack::new(&mut params, "backward", &config.arch, d, &mut rng)?;
        let softmax = Linear::new(&mut params, "softmax", d, words.len(), true, &mut rng);
        Ok(BiLm {
            config,
            words,
            chars,
            params,
            char_encoder,
            forward,
            backward,
            softmax,
        })
    }

    /// Builds both vocabularies from `sentences` and initializes a model.
    pub fn from_corpus<S: AsRef<str>>(
        config: BiLmConfig,
        sentences: &[Vec<S>],
        max_vocab: Option<usize>,
    ) -> Result<Self> {
        let words = WordVocab::build(sentences, max_vocab, 1)?;
        let boundary = [WordVocab::BOS_TOKEN, WordVocab::EOS_TOKEN];
        let chars = CharVocab::build(
            sentences
                .iter()
                .flat_map(|s| s.iter().map(|t| t.as_ref()))
                .chain(boundary),
        )?;
        BiLm::new(config, words, chars)
    }

    pub fn config(&self) -> &BiLmConfig {
        &self.config
    }

    pub fn words(&self) -> &WordVocab {
        &self.words
    }

    pub fn chars(&self) -> &CharVocab {
        &self.chars
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn char_encoder(&self) -> &CharEncoder {
        &self.char_encoder
    }

    pub fn softmax(&self) -> &Linear {
        &self.softmax
    }

    pub fn stack(&self, direction: Direction) -> &ContextualStack {
        match direction {
            Direction::Forward => &self.forward,
            Direction::Backward => &self.backward,
        }
    }

    /// Number of contextual layers `L`.
    pub fn num_layers(&self) -> usize {
        self.config.arch.layer_count()
    }

    /// `[<S>, tokens..., </S>]`
    fn wrap<S: AsRef<str>>(sentence: &[S]) -> Vec<&str> {
        let mut out = Vec::with_capacity(sentence.len() + 2);
        out.push(WordVocab::BOS_TOKEN);
        out.extend(sentence.iter().map(|t| t.as_ref()));
        out.push(WordVocab::EOS_TOKEN);
        out
    }

    fn encode_wrapped(
        &self,
        tape: &mut Tape,
        wrapped: &[&str],
        mut dropout: Option<&mut DropoutRng>,
    ) -> Result<Encoded> {
        let x = self.char_encoder.encode(tape, &self.chars, wrapped)?;
        let forward = self
            .forward
            .encode(tape, x, Direction::Forward, dropout.as_deref_mut())?;
        let backward = self.backward.encode(tape, x, Direction::Backward, dropout)?;
        Ok(Encoded {
            x,
            forward,
            backward,
        })
    }

    /// Records the summed forward and backward NLL of one sentence on `tape`.
    /// Returns `(forward sum, backward sum, predictions per direction)`.
    pub fn sentence_nll<S: AsRef<str>>(
        &self,
        tape: &mut Tape,
        sentence: &[S],
        dropout: Option<&mut DropoutRng>,
    ) -> Result<(Var, Var, usize)> {
        if sentence.is_empty() {
            return Err(Error::Empty("sentence"));
        }
        let wrapped = Self::wrap(sentence);
        let ids: Vec<usize> = wrapped
            .iter()
            .enumerate()
            .map(|(i, t)| match i {
                0 => WordVocab::BOS,
                _ if i == wrapped.len() - 1 => WordVocab::EOS,
                _ => self.words.id(t),
            })
            .collect();
        let n = wrapped.len();
        let enc = self.encode_wrapped(tape, &wrapped, dropout)?;
        let top_f = *enc.forward.last().expect("at least one layer");
        let top_b = *enc.backward.last().expect("at least one layer");

        // Forward state k predicts token k + 1; backward state k predicts k - 1.
        let hf = tape.slice_rows(top_f, 0, n - 1)?;
        let lf = self.softmax.forward(tape, hf)?;
        let nll_f = tape.cross_entropy(lf, &ids[1..])?;
        let hb = tape.slice_rows(top_b, 1, n)?;
        let lb = self.softmax.forward(tape, hb)?;
        let nll_b = tape.cross_entropy(lb, &ids[..n - 1])?;
        Ok((nll_f, nll_b, n - 1))
    }

    /// Directional NLL sums for one sentence, without gradients.
    pub fn sentence_nll_sums<S: AsRef<str>>(&self, sentence: &[S]) -> Result<NllSums> {
        let mut tape = Tape::new(&self.params);
        let (f, b, n) = self.sentence_nll(&mut tape, sentence, None)?;
        Ok(NllSums {
            forward: tape.value(f).item(),
            backward: tape.value(b).item(),
            tokens: n,
        })
    }

    pub fn nll_sums<S: AsRef<str>, T: AsRef<[S]> + Sync>(
        &self,
        batch: &[T],
        exec: Execution,
    ) -> Result<NllSums> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let parts = parallel::try_map(batch, exec, |s| self.sentence_nll_sums(s.as_ref()))?;
        let mut total = NllSums::default();
        for p in parts {
            total.add(p);
        }
        Ok(total)
    }

    /// Mean negative log-likelihood over tokens and both directions.
    pub fn joint_loss<S: AsRef<str>, T: AsRef<[S]> + Sync>(&self, batch: &[T]) -> Result<f64> {
        Ok(self.nll_sums(batch, Execution::Sequential)?.joint_loss())
    }

    pub fn perplexity<S: AsRef<str>, T: AsRef<[S]> + Sync>(
        &self,
        corpus: &[T],
        exec: Execution,
    ) -> Result<Perplexity> {
        Ok(self.nll_sums(corpus, exec)?.perplexity())
    }

    /// Joint loss and its gradient over `batch`. Sentences are processed on
    /// independent tapes and reduced in input order. `dropout_seed` enables
    /// training-mode dropout.
    pub fn loss_and_gradients<S: AsRef<str>, T: AsRef<[S]> + Sync>(
        &self,
        batch: &[T],
        dropout_seed: Option<u64>,
        exec: Execution,
    ) -> Result<(NllSums, Gradients)> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let indices: Vec<usize> = (0..batch.len()).collect();
        let parts = parallel::try_map(&indices, exec, |&i| {
            let mut rng = dropout_seed
                .map(|s| DropoutRng::seed_from_u64(s.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ i as u64));
            let mut tape = Tape::new(&self.params);
            let (f, b, n) = self.sentence_nll(&mut tape, batch[i].as_ref(), rng.as_mut())?;
            let sums = NllSums {
                forward: tape.value(f).item(),
                backward: tape.value(b).item(),
                tokens: n,
            };
            let total = tape.add(f, b)?;
            let grads = tape.backward(total)?;
            Ok::<_, Error>((sums, grads))
        })?;
        let mut sums = NllSums::default();
        let mut grads = Gradients::new();
        for (s, g) in parts {
            sums.add(s);
            grads.accumulate(g);
        }
        grads.scale(1.0 / (2.0 * sums.tokens as f64));
        Ok((sums, grads))
    }

    /// Context-insensitive embeddings `x_k` for arbitrary words: `[N, d]`.
    pub fn embed_words<S: AsRef<str>>(&self, words: &[S]) -> Result<NDArray> {
        let tokens: Vec<&str> = words.iter().map(|w| w.as_ref()).collect();
        let mut tape = Tape::new(&self.params);
        let x = self.char_encoder.encode(&mut tape, &self.chars, &tokens)?;
        Ok(tape.value(x).clone())
    }

    /// Layer stack for one sentence, boundary positions removed.
    pub fn extract_context_vectors<S: AsRef<str>>(&self, sentence: &[S]) -> Result<ContextVectors> {
        if sentence.is_empty() {
            return Err(Error::Empty("sentence"));
        }
        let wrapped = Self::wrap(sentence);
        let n = wrapped.len();
        let mut tape = Tape::new(&self.params);
        let enc = self.encode_wrapped(&mut tape, &wrapped, None)?;
        let strip = |v: Var| tape.value(v).slice_rows(1, n - 1);
        let x = strip(enc.x)?;
        let mut layers = vec![NDArray::concat_cols(&[&x, &x])?];
        for (f, b) in enc.forward.iter().zip(&enc.backward) {
            let (f, b) = (strip(*f)?, strip(*b)?);
            layers.push(NDArray::concat_cols(&[&f, &b])?);
        }
        let tokens = sentence.iter().map(|t| t.as_ref().to_string()).collect();
        ContextVectors::new(tokens, layers)
    }

    pub fn extract_batch<S: AsRef<str>, T: AsRef<[S]> + Sync>(
        &self,
        sentences: &[T],
        exec: Execution,
    ) -> Result<Vec<ContextVectors>> {
        parallel::try_map(sentences, exec, |s| self.extract_context_vectors(s.as_ref()))
    }

    /// Char-encoder output for wrapped sentences, used by the timing harness.
    pub(crate) fn word_layer(&self, wrapped: &[&str]) -> Result<NDArray> {
        self.embed_words(wrapped)
    }

    /// Both contextual stacks over precomputed word embeddings.
    pub(crate) fn contextual_layers(&self, x: &NDArray) -> Result<(Vec<NDArray>, Vec<NDArray>)> {
        let f = self.forward.encode_array(&self.params, x, Direction::Forward)?;
        let b = self.backward.encode_array(&self.params, x, Direction::Backward)?;
        Ok((f, b))
    }

    pub(crate) fn wrap_owned<S: AsRef<str>>(sentence: &[S]) -> Vec<&str> {
        Self::wrap(sentence)
    }

}
