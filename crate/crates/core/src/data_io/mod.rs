//! Readers and writers for corpora, treebanks, chunk and coreference
//! annotations, analogy sets, word vectors and context-vector dumps.

mod analogy;
mod chunks;
mod corpus;
mod coref;
mod dump;
mod trees;
mod vectors;

pub use analogy::{load_analogies, parse_analogies, AnalogyClass, AnalogyItem};
pub use chunks::{decode_bio, load_chunks, parse_chunks, ChunkSentence};
pub use corpus::{load_corpus, write_corpus, TokenizedCorpus};
pub use coref::{
    is_noun_tag, is_plural_noun_tag, is_plural_pronoun, is_pronoun, load_coref_instances,
    mention_head, parse_coref_instances, CorefData, PronounInstance, PRONOUNS,
};
pub use dump::{
    read_vector_dump, write_vector_dump, DumpHeader, VectorDump, VectorDumpReader,
    VectorDumpWriter, DUMP_VERSION,
};
pub use trees::{
    bracketed, load_tagged, load_trees, parse_tagged, parse_trees, Span, TaggedSentence, Tree,
    TreeSentence,
};
pub use vectors::{load_word_vectors, WordVectors};

pub(crate) use trees::crosses;

#[cfg(test)]
mod tests;
