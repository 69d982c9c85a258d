use serde::{Deserialize, Serialize};

use crate::graph::ConceptGraph;
use crate::{Error, Result};

/// Head and tail candidate pools and the cutoffs that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadTailSplit {
    /// Lexicographic order.
    pub head: Vec<String>,
    /// Lexicographic order.
    pub tail: Vec<String>,
    /// Tail pool is every concept with frequency `<= tail_cutoff`.
    pub tail_cutoff: u64,
    /// Head pool is every concept with frequency `> ratio * tail_cutoff`.
    pub ratio: u64,
}

impl HeadTailSplit {
    pub fn is_empty(&self) -> bool {
        self.head.is_empty() || self.tail.is_empty()
    }
}

/// Tail cutoff = lower median of the bottom quartile (at least one concept)
/// of observed frequencies. Both pools are empty when either would be.
pub fn split_head_tail(graph: &ConceptGraph, ratio: u64) -> HeadTailSplit {
    let mut freqs: Vec<u64> = graph.nodes().map(|(_, n)| n).collect();
    freqs.sort_unstable();
    let empty = |cutoff| HeadTailSplit {
        head: Vec::new(),
        tail: Vec::new(),
        tail_cutoff: cutoff,
        ratio,
    };
    if freqs.is_empty() {
        return empty(0);
    }
    let q = freqs.len().div_ceil(4).max(1);
    let cutoff = freqs[(q - 1) / 2];
    let bound = cutoff.saturating_mul(ratio);
    let tail: Vec<String> = graph.nodes().filter(|&(_, n)| n <= cutoff).map(|(c, _)| c.to_string()).collect();
    let head: Vec<String> = graph.nodes().filter(|&(_, n)| n > bound).map(|(c, _)| c.to_string()).collect();
    if head.is_empty() || tail.is_empty() {
        return empty(cutoff);
    }
    HeadTailSplit {
        head,
        tail,
        tail_cutoff: cutoff,
        ratio,
    }
}

/// Top `n` of `pool` by frequency, ties broken lexicographically.
pub fn select_representatives(pool: &[String], graph: &ConceptGraph, n: usize) -> Result<Vec<String>> {
    if pool.len() < n {
        return Err(Error::Input(format!(
            "pool holds {} concepts, {} short of the requested {n}",
            pool.len(),
            n - pool.len()
        )));
    }
    let mut ranked: Vec<(u64, &String)> = pool.iter().map(|c| (graph.freq(c), c)).collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    Ok(ranked.into_iter().take(n).map(|(_, c)| c.clone()).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptPair {
    pub head: String,
    pub tail: String,
    /// Co-occurrence count of the pair.
    pub weight: u64,
}

/// The `k` head-tail pairs with the smallest co-occurrence counts, ties
/// broken by head then tail lexicographically.
pub fn topk_min_edges(graph: &ConceptGraph, heads: &[String], tails: &[String], k: usize) -> Result<Vec<ConceptPair>> {
    let total = heads.len() * tails.len();
    if k > total {
        return Err(Error::Input(format!(
            "asked for {k} pairs but only {} x {} = {total} exist",
            heads.len(),
            tails.len()
        )));
    }
    let mut pairs: Vec<ConceptPair> = heads
        .iter()
        .flat_map(|h| {
            tails.iter().map(move |t| ConceptPair {
                head: h.clone(),
                tail: t.clone(),
                weight: graph.edge(h, t),
            })
        })
        .collect();
    pairs.sort_by(|a, b| {
        a.weight
            .cmp(&b.weight)
            .then_with(|| a.head.cmp(&b.head))
            .then_with(|| a.tail.cmp(&b.tail))
    });
    pairs.truncate(k);
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::ConceptVocabulary;

    fn graph_with(freqs: &[(&str, usize)]) -> ConceptGraph {
        let vocab = ConceptVocabulary::from_entries(freqs.iter().map(|(c, _)| *c)).unwrap();
        let mut caps = Vec::new();
        for (c, n) in freqs {
            caps.extend(std::iter::repeat(c.to_string()).take(*n));
        }
        ConceptGraph::from_captions(&caps, &vocab)
    }

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn split_examples() {
        let g = graph_with(&[("a", 1000), ("b", 5)]);
        let sp = split_head_tail(&g, 100);
        assert_eq!((sp.head, sp.tail), (s(&["a"]), s(&["b"])));

        let g = graph_with(&[("a", 100), ("b", 5)]);
        let sp = split_head_tail(&g, 100);
        assert!(sp.head.is_empty() && sp.tail.is_empty());
        assert!(split_head_tail(&ConceptGraph::new(), 100).is_empty());
    }

    #[test]
    fn select_examples() {
        let g = graph_with(&[("x", 3), ("b", 3), ("a", 3), ("z", 9)]);
        let pool = s(&["x", "b", "a"]);
        assert_eq!(select_representatives(&pool, &g, 3).unwrap(), s(&["a", "b", "x"]));
        assert_eq!(select_representatives(&s(&["a", "z", "b"]), &g, 2).unwrap(), s(&["z", "a"]));
        match select_representatives(&pool, &g, 5) {
            Err(Error::Input(m)) => assert!(m.contains("2 short")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn topk_examples() {
        let g = ConceptGraph::new();
        let p = topk_min_edges(&g, &s(&["h2", "h1"]), &s(&["t2", "t1"]), 3).unwrap();
        let names: Vec<(&str, &str)> = p.iter().map(|p| (p.head.as_str(), p.tail.as_str())).collect();
        assert_eq!(names, vec![("h1", "t1"), ("h1", "t2"), ("h2", "t1")]);
        assert!(p.iter().all(|p| p.weight == 0));
        assert_eq!(topk_min_edges(&g, &s(&["h"]), &s(&["t1", "t2"]), 2).unwrap().len(), 2);
        assert!(matches!(topk_min_edges(&g, &s(&["h"]), &s(&["t"]), 2), Err(Error::Input(_))));
    }
}
