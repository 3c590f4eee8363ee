use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Labeled constituent over the inclusive token range `[start, end]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl Span {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        Span {
            start,
            end,
            label: label.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, k: usize) -> bool {
        self.start <= k && k <= self.end
    }

    /// True when the spans overlap without either containing the other.
    pub fn crosses(&self, other: &Span) -> bool {
        crosses(self.start, self.end, other.start, other.end)
    }
}

pub(crate) fn crosses(a0: usize, a1: usize, b0: usize, b1: usize) -> bool {
    (a0 < b0 && b0 <= a1 && a1 < b1) || (b0 < a0 && a0 <= b1 && b1 < a1)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tree {
    Leaf(String),
    Node { label: String, children: Vec<Tree> },
}

impl Tree {
    /// Parses one bracketed tree.
    pub fn parse(text: &str) -> std::result::Result<Tree, String> {
        let tokens = lex(text);
        let mut pos = 0;
        let tree = parse_node(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err("trailing material after tree".into());
        }
        Ok(tree)
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            Tree::Leaf(_) => None,
            Tree::Node { label, .. } => Some(label),
        }
    }

    fn is_preterminal(&self) -> bool {
        matches!(self, Tree::Node { children, .. } if matches!(children.as_slice(), [Tree::Leaf(_)]))
    }

    /// Removes `-NONE-` elements and constituents left empty by their removal.
    fn prune_empty(self) -> Option<Tree> {
        match self {
            Tree::Leaf(w) => Some(Tree::Leaf(w)),
            Tree::Node { label, children } => {
                if label == "-NONE-" {
                    return None;
                }
                let children: Vec<Tree> = children.into_iter().filter_map(Tree::prune_empty).collect();
                if children.is_empty() {
                    None
                } else {
                    Some(Tree::Node { label, children })
                }
            }
        }
    }
}

fn lex(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c == '(' || c == ')' || c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(&text[s..i]);
            }
            if !c.is_whitespace() {
                out.push(&text[i..i + 1]);
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(&text[s..]);
    }
    out
}

fn parse_node(tokens: &[&str], pos: &mut usize) -> std::result::Result<Tree, String> {
    match tokens.get(*pos) {
        None => Err("unexpected end of input".into()),
        Some(&")") => Err("unbalanced ')'".into()),
        Some(&"(") => {
            *pos += 1;
            let label = match tokens.get(*pos) {
                Some(&t) if t != "(" && t != ")" => {
                    *pos += 1;
                    t.to_string()
                }
                _ => String::new(),
            };
            let mut children = Vec::new();
            loop {
                match tokens.get(*pos) {
                    None => return Err("unbalanced '(': missing ')'".into()),
                    Some(&")") => {
                        *pos += 1;
                        break;
                    }
                    _ => children.push(parse_node(tokens, pos)?),
                }
            }
            if children.is_empty() {
                return Err(format!("empty constituent '{label}'"));
            }
            Ok(Tree::Node { label, children })
        }
        Some(&w) => {
            *pos += 1;
            Ok(Tree::Leaf(w.to_string()))
        }
    }
}

/// `NP-SBJ-1` becomes `NP`; labels such as `-LRB-` are kept.
fn strip_function_tags(label: &str) -> &str {
    if label.starts_with('-') {
        return label;
    }
    let end = label.find(['-', '=']).unwrap_or(label.len());
    &label[..end]
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
}

/// Tokens, POS tags and labeled spans read from one bracketed tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
    pub spans: Vec<Span>,
}

impl TreeSentence {
    pub fn from_tree(tree: Tree) -> std::result::Result<Self, String> {
        let mut tree = tree.prune_empty().ok_or("tree has no tokens")?;
        // Unwrap an unlabeled or TOP/ROOT wrapper around a single tree.
        loop {
            match tree {
                Tree::Node { ref label, ref mut children }
                    if (label.is_empty() || label == "TOP" || label == "ROOT")
                        && children.len() == 1
                        && !matches!(children[0], Tree::Leaf(_)) =>
                {
                    tree = children.pop().expect("one child");
                }
                _ => break,
            }
        }
        let mut out = TreeSentence {
            tokens: Vec::new(),
            tags: Vec::new(),
            spans: Vec::new(),
        };
        if tree.is_preterminal() {
            collect(&tree, &mut out)?;
            let label = strip_function_tags(tree.label().unwrap_or("")).to_string();
            out.spans.push(Span::new(0, 0, label));
        } else {
            collect(&tree, &mut out)?;
        }
        out.spans.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));
        Ok(out)
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        TreeSentence::from_tree(Tree::parse(text)?)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tagged(&self) -> TaggedSentence {
        TaggedSentence {
            tokens: self.tokens.clone(),
            tags: self.tags.clone(),
        }
    }

    /// Smallest span with more than one token that contains `k`.
    pub fn smallest_multiword_span(&self, k: usize) -> Option<&Span> {
        self.spans
            .iter()
            .filter(|s| s.len() > 1 && s.contains(k))
            .min_by_key(|s| s.len())
    }
}

/// Walks the tree, appending leaves and returning the covered token range.
fn collect(tree: &Tree, out: &mut TreeSentence) -> std::result::Result<(usize, usize), String> {
    match tree {
        Tree::Leaf(w) => Err(format!("token '{w}' has no POS tag")),
        Tree::Node { label, children } => {
            if let [Tree::Leaf(w)] = children.as_slice() {
                out.tokens.push(w.clone());
                out.tags.push(label.clone());
                let k = out.tokens.len() - 1;
                return Ok((k, k));
            }
            // Follow unary chains of nonterminals covering the same tokens.
            let mut labels = vec![strip_function_tags(label).to_string()];
            let mut node = children;
            while let [only] = node.as_slice() {
                match only {
                    Tree::Node { label, children } if !only.is_preterminal() => {
                        labels.push(strip_function_tags(label).to_string());
                        node = children;
                    }
                    _ => break,
                }
            }
            let mut range: Option<(usize, usize)> = None;
            for child in node {
                let (a, b) = collect(child, out)?;
                range = Some(range.map_or((a, b), |(s, _)| (s, b)));
            }
            let (s, e) = range.expect("non-empty constituent");
            out.spans.push(Span::new(s, e, labels.join("+")));
            Ok((s, e))
        }
    }
}

/// Parses a file of bracketed trees, one per line or pretty-printed across
/// several lines.
pub fn parse_trees(text: &str, path: &Path) -> Result<Vec<TreeSentence>> {
    let mut out = Vec::new();
    let mut buf = String::new();
    let mut depth: i64 = 0;
    let mut start_line = 0;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if buf.trim().is_empty() {
            if line.trim().is_empty() {
                continue;
            }
            start_line = lineno;
        }
        for c in line.chars() {
            match c {
                '(' => depth += 1,
                ')' => depth -= 1,
                _ => {}
            }
            if depth < 0 {
                return Err(Error::parse(path, lineno, "unbalanced ')'"));
            }
        }
        buf.push_str(line);
        buf.push('\n');
        if depth == 0 {
            let t = TreeSentence::parse(&buf).map_err(|m| Error::parse(path, start_line, m))?;
            out.push(t);
            buf.clear();
        }
    }
    if !buf.trim().is_empty() {
        return Err(Error::parse(path, start_line, "unbalanced '(': tree never closed"));
    }
    Ok(out)
}

pub fn load_trees(path: impl AsRef<Path>) -> Result<Vec<TreeSentence>> {
    let path = path.as_ref();
    parse_trees(&fs::read_to_string(path)?, path)
}

/// Two-column `token tag` lines with blank lines between sentences.
pub fn parse_tagged(text: &str, path: &Path) -> Result<Vec<TaggedSentence>> {
    let mut out = Vec::new();
    let mut cur = TaggedSentence {
        tokens: Vec::new(),
        tags: Vec::new(),
    };
    for (i, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        match cols.as_slice() {
            [] => {
                if !cur.tokens.is_empty() {
                    out.push(std::mem::replace(
                        &mut cur,
                        TaggedSentence {
                            tokens: Vec::new(),
                            tags: Vec::new(),
                        },
                    ));
                }
            }
            [tok, tag] => {
                cur.tokens.push(tok.to_string());
                cur.tags.push(tag.to_string());
            }
            _ => {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected 2 columns, found {}", cols.len()),
                ))
            }
        }
    }
    if !cur.tokens.is_empty() {
        out.push(cur);
    }
    Ok(out)
}

pub fn load_tagged(path: impl AsRef<Path>) -> Result<Vec<TaggedSentence>> {
    let path = path.as_ref();
    parse_tagged(&fs::read_to_string(path)?, path)
}

/// Renders spans as a bracketed string over `tokens`, for diagnostics.
pub fn bracketed(tokens: &[String], spans: &[Span]) -> String {
    let mut opens = vec![Vec::new(); tokens.len()];
    let mut closes = vec![0usize; tokens.len()];
    let mut sorted: Vec<&Span> = spans.iter().collect();
    sorted.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));
    for s in sorted {
        opens[s.start].push(s.label.as_str());
        closes[s.end] += 1;
    }
    let mut out = String::new();
    for (k, t) in tokens.iter().enumerate() {
        for l in &opens[k] {
            out.push('(');
            out.push_str(l);
            out.push(' ');
        }
        out.push_str(t);
        out.push_str(&")".repeat(closes[k]));
        out.push(' ');
    }
    out.trim_end().to_string()
}
