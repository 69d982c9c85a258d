use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use rayon::prelude::*;

use crate::vocab::{tokenize, ConceptVocabulary};
use crate::{Error, Result};

/// Per-caption presence counts of concepts and concept pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConceptGraph {
    freq: BTreeMap<String, u64>,
    /// Keys are ordered `(a, b)` with `a < b`.
    edges: BTreeMap<(String, String), u64>,
    captions: u64,
}

fn key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl ConceptGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Counts each vocabulary concept once per caption, and each unordered
    /// pair of distinct concepts present in it once.
    pub fn add_caption(&mut self, caption: &str, vocab: &ConceptVocabulary) {
        self.captions += 1;
        let present: BTreeSet<String> = tokenize(caption).filter(|w| vocab.contains(w)).collect();
        let present: Vec<String> = present.into_iter().collect();
        for (i, a) in present.iter().enumerate() {
            *self.freq.entry(a.clone()).or_insert(0) += 1;
            for b in &present[i + 1..] {
                *self.edges.entry((a.clone(), b.clone())).or_insert(0) += 1;
            }
        }
    }

    pub fn from_captions<S: AsRef<str>>(captions: &[S], vocab: &ConceptVocabulary) -> Self {
        let mut g = Self::new();
        for c in captions {
            g.add_caption(c.as_ref(), vocab);
        }
        g
    }

    /// Splits the captions into shards, counts each in parallel and merges.
    pub fn from_captions_sharded<S: AsRef<str> + Sync>(
        captions: &[S],
        vocab: &ConceptVocabulary,
        shard_len: usize,
    ) -> Self {
        captions
            .par_chunks(shard_len.max(1))
            .map(|chunk| Self::from_captions(chunk, vocab))
            .reduce(Self::new, |mut a, b| {
                a.merge(&b);
                a
            })
    }

    /// One caption per line. Read failures carry the 1-based line number.
    pub fn ingest<R: BufRead>(reader: R, vocab: &ConceptVocabulary) -> Result<Self> {
        if vocab.is_empty() {
            return Err(Error::Input("vocabulary is empty".into()));
        }
        let mut g = Self::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| Error::Io { line: Some(i + 1), source })?;
            g.add_caption(&line, vocab);
        }
        Ok(g)
    }

    /// Adds every count of `other`.
    pub fn merge(&mut self, other: &ConceptGraph) {
        self.captions += other.captions;
        for (c, n) in &other.freq {
            *self.freq.entry(c.clone()).or_insert(0) += n;
        }
        for (k, n) in &other.edges {
            *self.edges.entry(k.clone()).or_insert(0) += n;
        }
    }

    pub fn caption_count(&self) -> u64 {
        self.captions
    }

    pub fn freq(&self, concept: &str) -> u64 {
        self.freq.get(concept).copied().unwrap_or(0)
    }

    /// Co-occurrence count; absent edges and self-pairs are 0.
    pub fn edge(&self, a: &str, b: &str) -> u64 {
        if a == b {
            return 0;
        }
        self.edges.get(&key(a, b)).copied().unwrap_or(0)
    }

    /// Observed concepts with their frequencies, in lexicographic order.
    pub fn nodes(&self) -> impl Iterator<Item = (&str, u64)> {
        self.freq.iter().map(|(c, &n)| (c.as_str(), n))
    }

    /// Non-zero edges as `(a, b, count)` with `a < b`, in key order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, u64)> {
        self.edges.iter().map(|((a, b), &n)| (a.as_str(), b.as_str(), n))
    }

    pub fn num_nodes(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> ConceptVocabulary {
        ConceptVocabulary::from_entries(["cat", "dog", "tree"]).unwrap()
    }

    #[test]
    fn hand_counted_example() {
        let g = ConceptGraph::from_captions(&["a cat and a dog", "a cat sleeping"], &vocab());
        assert_eq!(g.freq("cat"), 2);
        assert_eq!(g.freq("dog"), 1);
        assert_eq!(g.edge("cat", "dog"), 1);
        assert_eq!(g.edge("dog", "cat"), 1);
        assert_eq!(g.caption_count(), 2);
    }

    #[test]
    fn empty_corpus() {
        let g = ConceptGraph::ingest("".as_bytes(), &vocab()).unwrap();
        assert!(g.is_empty());
        assert_eq!(g.caption_count(), 0);
    }

    #[test]
    fn repeated_word_counts_once() {
        let g = ConceptGraph::from_captions(&["cat cat cat"], &vocab());
        assert_eq!(g.freq("cat"), 1);
        assert_eq!(g.edge("cat", "cat"), 0);
    }

    #[test]
    fn bad_utf8_reports_line() {
        let bytes: &[u8] = b"a cat\na dog\n\xff\xfe\n";
        match ConceptGraph::ingest(bytes, &vocab()) {
            Err(Error::Io { line: Some(3), .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_vocab_rejected() {
        let v = ConceptVocabulary::from_entries(Vec::<String>::new()).unwrap();
        assert!(matches!(ConceptGraph::ingest("cat".as_bytes(), &v), Err(Error::Input(_))));
    }

    #[test]
    fn double_ingest_doubles_counts() {
        let caps = ["cat dog tree", "dog tree", "tree", "nothing here"];
        let once = ConceptGraph::from_captions(&caps, &vocab());
        let mut twice = once.clone();
        twice.merge(&once);
        assert_eq!(twice.caption_count(), 2 * once.caption_count());
        for (c, n) in once.nodes() {
            assert_eq!(twice.freq(c), 2 * n);
        }
        for (a, b, n) in once.edges() {
            assert_eq!(twice.edge(a, b), 2 * n);
        }
    }
}
