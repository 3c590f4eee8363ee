use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalogyClass {
    Semantic,
    Syntactic,
}

impl AnalogyClass {
    /// Sections named `gram*` are syntactic.
    pub fn of_section(name: &str) -> Self {
        if name.starts_with("gram") {
            AnalogyClass::Syntactic
        } else {
            AnalogyClass::Semantic
        }
    }
}

/// `a : b :: c : d`
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalogyItem {
    pub a: String,
    pub b: String,
    pub c: String,
    pub d: String,
    pub section: String,
    pub class: AnalogyClass,
}

impl AnalogyItem {
    pub fn words(&self) -> [&str; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }
}

pub fn parse_analogies(text: &str, path: &Path) -> Result<Vec<AnalogyItem>> {
    let mut out = Vec::new();
    let mut section = String::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix(':') {
            section = name.trim().to_lowercase();
            continue;
        }
        let words: Vec<String> = line.split_whitespace().map(str::to_lowercase).collect();
        let [a, b, c, d]: [String; 4] = words.try_into().map_err(|w: Vec<String>| {
            Error::parse(path, i + 1, format!("expected 4 words, found {}", w.len()))
        })?;
        out.push(AnalogyItem {
            a,
            b,
            c,
            d,
            class: AnalogyClass::of_section(&section),
            section: section.clone(),
        });
    }
    Ok(out)
}

pub fn load_analogies(path: impl AsRef<Path>) -> Result<Vec<AnalogyItem>> {
    let path = path.as_ref();
    parse_analogies(&fs::read_to_string(path)?, path)
}
