use std::collections::HashMap;
use std::io::BufRead;

use crate::{Error, Result};

/// Lowercase single-word concepts in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConceptVocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

/// Lowercase alphanumeric words of `text`, in order, with repeats.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
}

impl ConceptVocabulary {
    /// Builds from entries; entries are trimmed and lowercased, blank ones
    /// skipped. Duplicates and entries that are not one word are input
    /// errors naming the 1-based entry.
    pub fn from_entries<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Self::default();
        for (i, raw) in entries.into_iter().enumerate() {
            let entry = raw.as_ref().trim().to_lowercase();
            if entry.is_empty() {
                continue;
            }
            let tokens: Vec<String> = tokenize(&entry).collect();
            if tokens.len() != 1 || tokens[0] != entry {
                return Err(Error::Input(format!(
                    "vocabulary line {}: '{entry}' is not a single alphanumeric word",
                    i + 1
                )));
            }
            if vocab.index.contains_key(&entry) {
                return Err(Error::Input(format!("vocabulary line {}: duplicate '{entry}'", i + 1)));
            }
            vocab.index.insert(entry.clone(), vocab.words.len());
            vocab.words.push(entry);
        }
        Ok(vocab)
    }

    /// One concept per line.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            lines.push(line.map_err(|source| Error::Io { line: Some(i + 1), source })?);
        }
        Self::from_entries(lines)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn position(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}
