use std::path::Path;

use proptest::prelude::*;

use super::*;
use crate::bilm::ContextVectors;
use crate::error::Error;
use crate::tensor::NDArray;

fn p() -> &'static Path {
    Path::new("test")
}

fn span(s: usize, e: usize, l: &str) -> Span {
    Span::new(s, e, l)
}

#[test]
fn corpus_lines_and_blank_lines() {
    let a = TokenizedCorpus::parse("a b\nc", "x");
    assert_eq!(a.len(), 2);
    assert_eq!(a.token_count(), 3);
    let b = TokenizedCorpus::parse("a b\nc\n\n", "x");
    assert_eq!(a.sentences, b.sentences);
}

#[test]
fn corpus_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.txt");
    let sents = vec![vec!["héllo", "wörld"], vec!["x"]];
    write_corpus(&path, &sents).unwrap();
    let back = load_corpus(&path).unwrap();
    assert_eq!(back.sentences, sents);
    assert!(write_corpus(&path, &[vec!["a b"]]).is_err());
}

#[test]
fn corpus_rejects_invalid_utf8() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, [0x61, 0xff, 0x0a]).unwrap();
    assert!(matches!(load_corpus(&path), Err(Error::Format(_))));
}

#[test]
fn tree_spans_and_tags() {
    let t = TreeSentence::parse("(S (NP (DT the) (NN dog)) (VP (VBZ runs)))").unwrap();
    assert_eq!(t.tokens, ["the", "dog", "runs"]);
    assert_eq!(t.tags, ["DT", "NN", "VBZ"]);
    assert_eq!(t.spans, vec![span(0, 2, "S"), span(0, 1, "NP"), span(2, 2, "VP")]);
}

#[test]
fn single_token_tree() {
    let t = TreeSentence::parse("(S (NN dog))").unwrap();
    assert_eq!(t.spans, vec![span(0, 0, "S")]);
    assert_eq!(t.tags, ["NN"]);
    let bare = TreeSentence::parse("(NN dog)").unwrap();
    assert_eq!(bare.spans.len(), 1);
    assert_eq!(bare.tags.len(), 1);
}

#[test]
fn unary_chains_collapse_and_wrappers_unwrap() {
    let t = TreeSentence::parse("( (S (VP (VB go) (ADVP (RB now)))))").unwrap();
    assert_eq!(t.spans, vec![span(0, 1, "S+VP"), span(1, 1, "ADVP")]);
    let t = TreeSentence::parse("(TOP (S (NP-SBJ-1 (PRP it)) (VP (VBD ran))))").unwrap();
    assert_eq!(t.spans[0], span(0, 1, "S"));
    assert_eq!(t.spans[1], span(0, 0, "NP"));
}

#[test]
fn traces_are_removed() {
    let t = TreeSentence::parse("(S (NP (-NONE- *T*-1)) (NP (NN dog)) (VP (VBZ runs)))").unwrap();
    assert_eq!(t.tokens, ["dog", "runs"]);
    assert_eq!(t.spans[0], span(0, 1, "S"));
}

#[test]
fn multi_line_trees_and_errors() {
    let text = "(S\n  (NP (DT a))\n  (VP (VB b)))\n\n(S (NN c))\n";
    let trees = parse_trees(text, p()).unwrap();
    assert_eq!(trees.len(), 2);
    match parse_trees("(S (NN a))\n(S (NN b)))\n", p()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
    match parse_trees("(S (NN a))\n\n(S (NN b)\n", p()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn smallest_multiword_span() {
    let t = TreeSentence::parse("(S (NP (DT a) (NN b)) (VP (VB c) (NP (PRP it))))").unwrap();
    assert_eq!(t.smallest_multiword_span(3), Some(&span(2, 3, "VP")));
    assert_eq!(t.smallest_multiword_span(0), Some(&span(0, 1, "NP")));
}

#[test]
fn tagged_two_column() {
    let s = parse_tagged("the DT\ndog NN\n\nran VBD\n", p()).unwrap();
    assert_eq!(s.len(), 2);
    assert_eq!(s[0].tags, ["DT", "NN"]);
    assert!(matches!(parse_tagged("a b c\n", p()), Err(Error::Parse { line: 1, .. })));
}

#[test]
fn bio_decoding() {
    let (s, r) = decode_bio(&["B-NP", "I-NP", "O", "B-VP"]).unwrap();
    assert_eq!(s, vec![span(0, 1, "NP"), span(3, 3, "VP")]);
    assert_eq!(r, 0);
    let (s, _) = decode_bio(&["O", "O"]).unwrap();
    assert!(s.is_empty());
    let (s, r) = decode_bio(&["I-NP", "I-NP", "I-VP"]).unwrap();
    assert_eq!(s, vec![span(0, 1, "NP"), span(2, 2, "VP")]);
    assert_eq!(r, 2);
    assert!(decode_bio(&["X-NP"]).is_err());
}

#[test]
fn chunk_file() {
    let text = "He PRP B-NP\nreckons VBZ B-VP\nthe DT B-NP\ndeficit NN I-NP\n. . O\n\nok UH I-INTJ\n";
    let c = parse_chunks(text, p()).unwrap();
    assert_eq!(c.len(), 2);
    assert_eq!(c[0].chunks.len(), 3);
    assert_eq!(c[0].outside(), vec![4]);
    assert_eq!(c[1].repairs, 1);
    assert!(matches!(parse_chunks("a b\n", p()), Err(Error::Parse { line: 1, .. })));
}

#[test]
fn analogy_sections() {
    let text = ": capital-common-countries\nAthens Greece Oslo Norway\n: gram1-adjective-to-adverb\namazing amazingly apparent apparently\ncalm calmly cheerful cheerfully\n";
    let items = parse_analogies(text, p()).unwrap();
    assert_eq!(items.len(), 3);
    assert_eq!(items[0].class, AnalogyClass::Semantic);
    assert_eq!(items[0].a, "athens");
    assert_eq!(items.iter().filter(|i| i.class == AnalogyClass::Syntactic).count(), 2);
    assert!(matches!(
        parse_analogies(": x\na b c\n", p()),
        Err(Error::Parse { line: 2, .. })
    ));
}

#[test]
fn word_vector_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.txt");
    std::fs::write(&path, "cat 1 2 3\ndog 4 5 6\n").unwrap();
    let v = load_word_vectors(&path).unwrap();
    assert_eq!(v.len(), 2);
    assert_eq!(v.get("dog"), Some(&[4.0, 5.0, 6.0][..]));
    std::fs::write(&path, "2 3\ncat 1 2 3\ncat 4 5 6\n").unwrap();
    let v = load_word_vectors(&path).unwrap();
    assert_eq!(v.len(), 1);
    assert_eq!(v.duplicates, 1);
    assert_eq!(v.get("cat"), Some(&[1.0, 2.0, 3.0][..]));
    std::fs::write(&path, "cat 1 2 3\ndog 4 5\n").unwrap();
    assert!(matches!(load_word_vectors(&path), Err(Error::Parse { line: 2, .. })));
}

fn conll_line(doc: &str, k: usize, word: &str, pos: &str, parse: &str, coref: &str) -> String {
    format!("{doc} 0 {k} {word} {pos} {parse} - - - spk * {coref}\n")
}

fn conll(sentences: &[&[(&str, &str, &str, &str)]]) -> String {
    let mut out = String::from("#begin document (d); part 000\n");
    for s in sentences {
        for (k, (w, pos, parse, coref)) in s.iter().enumerate() {
            out.push_str(&conll_line("d", k, w, pos, parse, coref));
        }
        out.push('\n');
    }
    out.push_str("#end document\n");
    out
}

#[test]
fn coref_single_instance() {
    let text = conll(&[&[
        ("The", "DT", "(TOP(S(NP*", "(3"),
        ("government", "NN", "*)", "3)"),
        ("said", "VBD", "(VP*", "-"),
        ("it", "PRP", "(SBAR(S(NP*)", "(3)"),
        ("would", "MD", "(VP*", "-"),
        ("act", "VB", "(VP*)))))", "-"),
        (".", ".", "*))", "-"),
    ]]);
    let d = parse_coref_instances(&text, p()).unwrap();
    assert_eq!(d.documents, 1);
    assert_eq!(d.instances.len(), 1);
    let inst = &d.instances[0];
    assert_eq!(inst.pronoun, 3);
    assert_eq!(inst.antecedent_head, 1);
    assert_eq!(inst.candidates, vec![1]);
    assert_eq!(inst.sentence.tokens.len(), 7);
}

#[test]
fn coref_cross_sentence_antecedent_is_ignored() {
    let text = conll(&[
        &[("Dogs", "NNS", "(TOP(S(NP*)", "(1)"), ("bark", "VBP", "(VP*)))", "-")],
        &[("They", "PRP", "(TOP(S(NP*)", "(1)"), ("run", "VBP", "(VP*)))", "-")],
    ]);
    let d = parse_coref_instances(&text, p()).unwrap();
    assert_eq!(d.sentences, 2);
    assert!(d.instances.is_empty());
}

#[test]
fn coref_malformed_column() {
    let text = conll(&[&[("It", "PRP", "(TOP(S(NP*)", "(x)"), ("ran", "VBD", "(VP*)))", "-")]]);
    assert!(matches!(parse_coref_instances(&text, p()), Err(Error::Parse { .. })));
}

fn cv(tokens: &[&str], layers: usize, dim: usize, seed: f64) -> ContextVectors {
    let n = tokens.len();
    let ls = (0..layers)
        .map(|l| {
            NDArray::new(
                vec![n, dim],
                (0..n * dim).map(|i| (i as f64 * 0.37 + l as f64 + seed).sin()).collect(),
            )
            .unwrap()
        })
        .collect();
    ContextVectors::new(tokens.iter().map(|t| t.to_string()).collect(), ls).unwrap()
}

#[test]
fn dump_size_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.blmv");
    let rec = cv(&["a", "bb", "ccc"], 3, 8, 0.0);
    write_vector_dump(&path, std::slice::from_ref(&rec), (0, 0)).unwrap();
    let size = std::fs::metadata(&path).unwrap().len() as usize;
    let tokens = 4 + 3 * 4 + (1 + 2 + 3);
    assert_eq!(size, DumpHeader::BYTES + 4 + tokens + 3 * 3 * 8 * 4 + 4);
    let back = read_vector_dump(&path).unwrap();
    assert_eq!(back.records, vec![rec.to_f32_precision()]);
}

#[test]
fn empty_dump() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.blmv");
    write_vector_dump(&path, &[], (3, 8)).unwrap();
    let d = read_vector_dump(&path).unwrap();
    assert!(d.records.is_empty());
    assert_eq!(d.header.layers, 3);
}

#[test]
fn dump_corruption_is_a_checksum_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.blmv");
    write_vector_dump(&path, &[cv(&["x", "y"], 2, 4, 1.0)], (0, 0)).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    for i in 0..bytes.len() {
        let mut bad = bytes.clone();
        bad[i] ^= 0x10;
        std::fs::write(&path, &bad).unwrap();
        let err = read_vector_dump(&path).unwrap_err();
        assert!(matches!(err, Error::Checksum { .. }), "byte {i}: {err}");
    }
}

#[test]
fn dump_streaming_reader_reports_bad_trailer_last() {
    let mut buf = Vec::new();
    let header = DumpHeader { layers: 1, dim: 2, count: 2 };
    let mut w = VectorDumpWriter::new(&mut buf, header).unwrap();
    w.write(&cv(&["a"], 1, 2, 0.0)).unwrap();
    w.write(&cv(&["b", "c"], 1, 2, 0.5)).unwrap();
    w.finish().unwrap();
    let n = buf.len();
    buf[n - 1] ^= 1;
    let items: Vec<_> = VectorDumpReader::new(buf.as_slice()).unwrap().collect();
    assert_eq!(items.len(), 3);
    assert!(items[0].is_ok() && items[1].is_ok());
    assert!(matches!(items[2], Err(Error::Checksum { .. })));
}

#[test]
fn dump_writer_enforces_header() {
    let mut buf = Vec::new();
    let header = DumpHeader { layers: 2, dim: 4, count: 1 };
    let mut w = VectorDumpWriter::new(&mut buf, header).unwrap();
    assert!(w.write(&cv(&["a"], 3, 4, 0.0)).is_err());
    assert!(w.finish().is_err());
}

fn arb_tree() -> impl Strategy<Value = String> {
    let leaf = "[a-z]{1,3}".prop_map(|w| format!("(NN {w})"));
    leaf.prop_recursive(4, 24, 3, |inner| {
        (prop::sample::select(vec!["NP", "VP", "S", "PP"]), prop::collection::vec(inner, 1..4))
            .prop_map(|(l, kids)| format!("({l} {})", kids.join(" ")))
    })
}

proptest! {
    #[test]
    fn tree_spans_nest(text in arb_tree()) {
        let t = TreeSentence::parse(&text).unwrap();
        prop_assert_eq!(t.tokens.len(), t.tags.len());
        for a in &t.spans {
            prop_assert!(a.end < t.tokens.len());
            for b in &t.spans {
                prop_assert!(!a.crosses(b));
            }
        }
        let root = t.spans.iter().find(|s| s.start == 0 && s.end + 1 == t.tokens.len());
        prop_assert!(root.is_some());
    }

    #[test]
    fn dump_round_trip_is_exact(
        tokens in prop::collection::vec("\\PC{1,4}", 1..5),
        layers in 1usize..4,
        half in 1usize..4,
    ) {
        let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
        let rec = cv(&refs, layers, 2 * half, 0.25).to_f32_precision();
        let mut buf = Vec::new();
        let header = DumpHeader { layers, dim: 2 * half, count: 1 };
        let mut w = VectorDumpWriter::new(&mut buf, header).unwrap();
        w.write(&rec).unwrap();
        w.finish().unwrap();
        let back: Vec<_> = VectorDumpReader::new(buf.as_slice()).unwrap().collect::<Result<_, _>>().unwrap();
        prop_assert_eq!(back, vec![rec]);
    }
}
