use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::trees::{Span, TreeSentence};
use crate::error::{Error, Result};

/// Third-person personal pronouns considered for resolution.
pub const PRONOUNS: [&str; 7] = ["he", "him", "she", "her", "it", "them", "they"];

pub fn is_pronoun(token: &str) -> bool {
    PRONOUNS.contains(&token.to_lowercase().as_str())
}

pub fn is_noun_tag(tag: &str) -> bool {
    matches!(tag, "NN" | "NNS" | "NNP" | "NNPS")
}

pub fn is_plural_noun_tag(tag: &str) -> bool {
    matches!(tag, "NNS" | "NNPS")
}

pub fn is_plural_pronoun(token: &str) -> bool {
    matches!(token.to_lowercase().as_str(), "them" | "they")
}

/// A pronoun whose coreference chain has an earlier mention in the same
/// sentence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PronounInstance {
    pub sentence: TreeSentence,
    pub pronoun: usize,
    /// Head of the gold antecedent mention.
    pub antecedent_head: usize,
    /// Noun-tagged positions before the pronoun.
    pub candidates: Vec<usize>,
}

impl PronounInstance {
    pub fn new(sentence: TreeSentence, pronoun: usize, antecedent_head: usize) -> Self {
        let candidates = (0..pronoun)
            .filter(|&k| is_noun_tag(&sentence.tags[k]))
            .collect();
        PronounInstance {
            sentence,
            pronoun,
            antecedent_head,
            candidates,
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.sentence.tokens
    }

    pub fn tags(&self) -> &[String] {
        &self.sentence.tags
    }

    pub fn pronoun_is_plural(&self) -> bool {
        is_plural_pronoun(&self.sentence.tokens[self.pronoun])
    }

    /// Candidates, restricted to nouns matching the pronoun in number when
    /// `agreement` is set.
    pub fn filtered_candidates(&self, agreement: bool) -> Vec<usize> {
        let plural = self.pronoun_is_plural();
        self.candidates
            .iter()
            .copied()
            .filter(|&k| !agreement || is_plural_noun_tag(&self.sentence.tags[k]) == plural)
            .collect()
    }
}

/// Head rule: rightmost noun-tagged token of the mention.
pub fn mention_head(tags: &[String], mention: &Span) -> Option<usize> {
    (mention.start..=mention.end).rev().find(|&k| is_noun_tag(&tags[k]))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorefData {
    pub instances: Vec<PronounInstance>,
    pub documents: usize,
    pub sentences: usize,
    /// Sentences contributing at least one instance.
    pub sentences_with_instances: usize,
}

struct Row {
    word: String,
    pos: String,
    parse: String,
    coref: String,
}

/// Mentions as spans labeled with their chain id.
fn parse_coref_column(values: &[&str]) -> std::result::Result<Vec<Span>, String> {
    let mut open: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut out = Vec::new();
    for (k, v) in values.iter().enumerate() {
        if *v == "-" {
            continue;
        }
        for part in v.split('|') {
            let starts = part.starts_with('(');
            let ends = part.ends_with(')');
            let id = part.trim_start_matches('(').trim_end_matches(')');
            if id.is_empty() || !id.chars().all(|c| c.is_ascii_digit()) || !(starts || ends) {
                return Err(format!("malformed coreference entry '{part}'"));
            }
            if starts && ends {
                out.push(Span::new(k, k, id));
            } else if starts {
                open.entry(id).or_default().push(k);
            } else {
                let s = open
                    .get_mut(id)
                    .and_then(Vec::pop)
                    .ok_or_else(|| format!("chain {id} closed without opening"))?;
                out.push(Span::new(s, k, id));
            }
        }
    }
    if let Some((id, _)) = open.iter().find(|(_, v)| !v.is_empty()) {
        return Err(format!("chain {id} never closed"));
    }
    out.sort();
    Ok(out)
}

fn sentence_instances(rows: &[Row]) -> std::result::Result<Vec<PronounInstance>, String> {
    let bracketed: String = rows
        .iter()
        .map(|r| r.parse.replace('*', &format!("({} {})", r.pos, r.word)))
        .collect();
    let tree = TreeSentence::parse(&bracketed)?;
    if tree.tokens.len() != rows.len() {
        return Err("parse column does not cover every token".into());
    }
    let coref: Vec<&str> = rows.iter().map(|r| r.coref.as_str()).collect();
    let mentions = parse_coref_column(&coref)?;
    let mut out = Vec::new();
    for k in 0..rows.len() {
        if !is_pronoun(&tree.tokens[k]) {
            continue;
        }
        let Some(chain) = mentions.iter().find(|m| m.start == k && m.end == k).map(|m| &m.label) else {
            continue;
        };
        // Nearest earlier mention of the same chain that has a noun head.
        let antecedent = mentions
            .iter()
            .filter(|m| &m.label == chain && m.end < k)
            .filter_map(|m| mention_head(&tree.tags, m).map(|h| (m.end, h)))
            .max();
        if let Some((_, head)) = antecedent {
            out.push(PronounInstance::new(tree.clone(), k, head));
        }
    }
    Ok(out)
}

/// CoNLL-2012 column layout: word in column 4, POS in 5, parse bit in 6,
/// coreference in the last column.
pub fn parse_coref_instances(text: &str, path: &Path) -> Result<CorefData> {
    let mut data = CorefData::default();
    let mut rows: Vec<Row> = Vec::new();
    let mut first_line = 0;
    let flush = |rows: &mut Vec<Row>, line: usize, data: &mut CorefData| -> Result<()> {
        if rows.is_empty() {
            return Ok(());
        }
        let found = sentence_instances(rows).map_err(|m| Error::parse(path, line, m))?;
        data.sentences += 1;
        if !found.is_empty() {
            data.sentences_with_instances += 1;
        }
        data.instances.extend(found);
        rows.clear();
        Ok(())
    };
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.starts_with("#begin") {
            data.documents += 1;
            continue;
        }
        if trimmed.starts_with('#') {
            flush(&mut rows, first_line, &mut data)?;
            continue;
        }
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        if cols.is_empty() {
            flush(&mut rows, first_line, &mut data)?;
            continue;
        }
        if cols.len() < 7 {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected at least 7 columns, found {}", cols.len()),
            ));
        }
        if rows.is_empty() {
            first_line = i + 1;
        }
        rows.push(Row {
            word: cols[3].to_string(),
            pos: cols[4].to_string(),
            parse: cols[5].to_string(),
            coref: cols[cols.len() - 1].to_string(),
        });
    }
    flush(&mut rows, first_line, &mut data)?;
    Ok(data)
}

fn conll_files(dir: &Path, out: &mut Vec<std::path::PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<Vec<_>>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            conll_files(&p, out)?;
        } else if p.to_string_lossy().ends_with("conll") {
            out.push(p);
        }
    }
    Ok(())
}

/// Reads one file, or every `*conll` file below a directory in path order.
pub fn load_coref_instances(path: impl AsRef<Path>) -> Result<CorefData> {
    let path = path.as_ref();
    if !path.is_dir() {
        return parse_coref_instances(&fs::read_to_string(path)?, path);
    }
    let mut files = Vec::new();
    conll_files(path, &mut files)?;
    let mut all = CorefData::default();
    for f in files {
        let d = parse_coref_instances(&fs::read_to_string(&f)?, &f)?;
        all.documents += d.documents;
        all.sentences += d.sentences;
        all.sentences_with_instances += d.sentences_with_instances;
        all.instances.extend(d.instances);
    }
    Ok(all)
}
