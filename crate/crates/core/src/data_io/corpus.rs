use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Pre-tokenized sentences, one per line in the source file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenizedCorpus {
    pub sentences: Vec<Vec<String>>,
    pub source: PathBuf,
}

impl TokenizedCorpus {
    pub fn parse(text: &str, source: impl Into<PathBuf>) -> Self {
        let sentences = text
            .lines()
            .map(|l| l.split_whitespace().map(str::to_string).collect::<Vec<_>>())
            .filter(|s| !s.is_empty())
            .collect();
        TokenizedCorpus {
            sentences,
            source: source.into(),
        }
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<TokenizedCorpus> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|e| Error::Format(format!("{}: invalid UTF-8: {e}", path.display())))?;
    Ok(TokenizedCorpus::parse(&text, path))
}

pub fn write_corpus<S: AsRef<str>>(path: impl AsRef<Path>, sentences: &[Vec<S>]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for s in sentences {
        let line: Vec<&str> = s.iter().map(|t| t.as_ref()).collect();
        if line.is_empty() || line.iter().any(|t| t.is_empty() || t.contains(char::is_whitespace)) {
            return Err(Error::Format(
                "sentences must be non-empty and tokens free of whitespace".into(),
            ));
        }
        writeln!(out, "{}", line.join(" "))?;
    }
    out.flush()?;
    Ok(())
}
