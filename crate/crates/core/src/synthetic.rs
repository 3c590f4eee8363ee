//! Small probabilistic grammar producing tagged, bracketed toy sentences.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data_io::TreeSentence;

const DET: &[&str] = &["the", "a"];
const ADJ: &[&str] = &["big", "small", "red", "old"];
const NOUN: &[&str] = &["dog", "cat", "man", "woman", "ball", "park", "house", "bird"];
const NOUNS: &[&str] = &["dogs", "cats", "men", "birds"];
const NAME: &[&str] = &["john", "mary"];
const TVERB: &[&str] = &["saw", "chased", "liked", "found"];
const IVERB: &[&str] = &["slept", "ran", "sang"];
const PREP: &[&str] = &["in", "near", "with"];

fn pick<R: Rng>(rng: &mut R, words: &[&str]) -> String {
    words.choose(rng).expect("non-empty word list").to_string()
}

fn noun_phrase<R: Rng>(rng: &mut R) -> String {
    match rng.gen_range(0..10) {
        0..=3 => format!("(NP (DT {}) (NN {}))", pick(rng, DET), pick(rng, NOUN)),
        4..=5 => format!(
            "(NP (DT {}) (JJ {}) (NN {}))",
            pick(rng, DET),
            pick(rng, ADJ),
            pick(rng, NOUN)
        ),
        6..=7 => format!("(NP (DT the) (NNS {}))", pick(rng, NOUNS)),
        _ => format!("(NP (NNP {}))", pick(rng, NAME)),
    }
}

fn verb_phrase<R: Rng>(rng: &mut R) -> String {
    match rng.gen_range(0..10) {
        0..=4 => format!("(VP (VBD {}) {})", pick(rng, TVERB), noun_phrase(rng)),
        5..=7 => format!(
            "(VP (VBD {}) {} (PP (IN {}) {}))",
            pick(rng, TVERB),
            noun_phrase(rng),
            pick(rng, PREP),
            noun_phrase(rng)
        ),
        _ => format!("(VP (VBD {}))", pick(rng, IVERB)),
    }
}

/// One bracketed sentence `S -> NP VP .`.
pub fn toy_tree<R: Rng>(rng: &mut R) -> String {
    format!("(S {} {} (. .))", noun_phrase(rng), verb_phrase(rng))
}

/// `n` bracketed toy sentences, deterministic in `seed`.
pub fn toy_trees(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| toy_tree(&mut rng)).collect()
}

/// [`toy_trees`], parsed.
pub fn toy_treebank(n: usize, seed: u64) -> Vec<TreeSentence> {
    toy_trees(n, seed)
        .iter()
        .map(|t| TreeSentence::parse(t).expect("grammar emits valid trees"))
        .collect()
}

/// Token lists of [`toy_treebank`].
pub fn toy_corpus(n: usize, seed: u64) -> Vec<Vec<String>> {
    toy_treebank(n, seed).into_iter().map(|t| t.tokens).collect()
}
