use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::trees::Span;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
    pub chunks: Vec<Span>,
    /// Stray `I-` tags rewritten as `B-`.
    pub repairs: usize,
}

impl ChunkSentence {
    /// Tokens outside every chunk.
    pub fn outside(&self) -> Vec<usize> {
        (0..self.tokens.len())
            .filter(|&k| !self.chunks.iter().any(|c| c.contains(k)))
            .collect()
    }
}

/// Decodes BIO tags into spans. Returns the spans and the number of `I-`
/// tags that did not continue a chunk of the same type.
pub fn decode_bio<S: AsRef<str>>(tags: &[S]) -> std::result::Result<(Vec<Span>, usize), String> {
    let mut spans: Vec<Span> = Vec::new();
    let mut open: Option<Span> = None;
    let mut repairs = 0;
    for (k, tag) in tags.iter().enumerate() {
        let tag = tag.as_ref();
        if tag == "O" {
            spans.extend(open.take());
            continue;
        }
        let (kind, label) = tag
            .split_once('-')
            .filter(|(k, l)| (*k == "B" || *k == "I") && !l.is_empty())
            .ok_or_else(|| format!("invalid chunk tag '{tag}'"))?;
        let continues = kind == "I" && open.as_ref().is_some_and(|s| s.label == label);
        if continues {
            if let Some(s) = open.as_mut() {
                s.end = k;
            }
        } else {
            if kind == "I" {
                repairs += 1;
            }
            spans.extend(open.take());
            open = Some(Span::new(k, k, label));
        }
    }
    spans.extend(open);
    Ok((spans, repairs))
}

/// CoNLL-2000 layout: `token POS chunk` per line, blank lines between
/// sentences.
pub fn parse_chunks(text: &str, path: &Path) -> Result<Vec<ChunkSentence>> {
    let mut out = Vec::new();
    let mut rows: Vec<(String, String, String)> = Vec::new();
    let mut first_line = 0;
    let flush = |rows: &mut Vec<(String, String, String)>, line: usize, out: &mut Vec<ChunkSentence>| {
        if rows.is_empty() {
            return Ok(());
        }
        let chunk_tags: Vec<&str> = rows.iter().map(|r| r.2.as_str()).collect();
        let (chunks, repairs) = decode_bio(&chunk_tags).map_err(|m| Error::parse(path, line, m))?;
        let (tokens, tags) = rows.drain(..).map(|(t, p, _)| (t, p)).unzip();
        out.push(ChunkSentence {
            tokens,
            tags,
            chunks,
            repairs,
        });
        Ok::<_, Error>(())
    };
    for (i, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        match cols.as_slice() {
            [] => flush(&mut rows, first_line, &mut out)?,
            [tok, pos, chunk] => {
                if rows.is_empty() {
                    first_line = i + 1;
                }
                rows.push((tok.to_string(), pos.to_string(), chunk.to_string()));
            }
            _ => {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected 3 columns, found {}", cols.len()),
                ))
            }
        }
    }
    flush(&mut rows, first_line, &mut out)?;
    Ok(out)
}

pub fn load_chunks(path: impl AsRef<Path>) -> Result<Vec<ChunkSentence>> {
    let path = path.as_ref();
    parse_chunks(&fs::read_to_string(path)?, path)
}
