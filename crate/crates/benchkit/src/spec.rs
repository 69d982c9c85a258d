use std::io::BufRead;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::ConceptGraph;
use crate::prompts::{gen_prompts, TemplateSet};
use crate::select::{select_representatives, split_head_tail, topk_min_edges, ConceptPair};
use crate::vocab::ConceptVocabulary;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Captions with a content hash identifying them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub captions: Vec<String>,
    /// Hex SHA-256 of the captions, each followed by `\n`.
    pub id: String,
}

impl Corpus {
    pub fn new(captions: Vec<String>) -> Self {
        let mut h = Sha256::new();
        for c in &captions {
            h.update(c.as_bytes());
            h.update(b"\n");
        }
        Self {
            captions,
            id: format!("{:x}", h.finalize()),
        }
    }

    /// One caption per line; read failures carry the 1-based line number.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut captions = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            captions.push(line.map_err(|source| Error::Io { line: Some(i + 1), source })?);
        }
        Ok(Self::new(captions))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildParams {
    /// Representatives drawn from each pool.
    pub n: usize,
    /// Pairs kept.
    pub k: usize,
    /// Required head:tail frequency ratio.
    pub threshold: u64,
}

impl Default for BuildParams {
    fn default() -> Self {
        Self { n: 6, k: 15, threshold: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecParams {
    pub n: usize,
    pub k: usize,
    pub threshold: u64,
    pub tail_cutoff: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub schema_version: u32,
    pub corpus_id: String,
    pub caption_count: u64,
    pub params: SpecParams,
    pub heads: Vec<String>,
    pub tails: Vec<String>,
    pub pairs: Vec<ConceptPair>,
    /// Five prompts per pair, pair-major.
    pub prompts: Vec<String>,
}

impl BenchmarkSpec {
    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("spec serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Input(format!("benchmark spec: {e}")))?;
        if spec.schema_version != SCHEMA_VERSION {
            return Err(Error::Input(format!(
                "unsupported benchmark schema version {}",
                spec.schema_version
            )));
        }
        Ok(spec)
    }
}

/// Full pipeline: graph, head/tail split, representatives, minimal-edge
/// pairs and prompts.
pub fn build_benchmark(
    corpus: &Corpus,
    vocab: &ConceptVocabulary,
    params: BuildParams,
    templates: &TemplateSet,
) -> Result<BenchmarkSpec> {
    if vocab.is_empty() {
        return Err(Error::Input("vocabulary is empty".into()));
    }
    if params.n == 0 || params.k == 0 || params.threshold == 0 {
        return Err(Error::Config("n, k and threshold must be >= 1".into()));
    }
    let graph = ConceptGraph::from_captions_sharded(&corpus.captions, vocab, 256);
    let split = split_head_tail(&graph, params.threshold);
    if split.is_empty() {
        return Err(Error::Input(format!(
            "no head/tail split at ratio {} (tail cutoff {})",
            params.threshold, split.tail_cutoff
        )));
    }
    let heads = select_representatives(&split.head, &graph, params.n)?;
    let tails = select_representatives(&split.tail, &graph, params.n)?;
    let pairs = topk_min_edges(&graph, &heads, &tails, params.k)?;
    let prompts = pairs.iter().flat_map(|p| gen_prompts(p, templates)).collect();
    Ok(BenchmarkSpec {
        schema_version: SCHEMA_VERSION,
        corpus_id: corpus.id.clone(),
        caption_count: graph.caption_count(),
        params: SpecParams {
            n: params.n,
            k: params.k,
            threshold: params.threshold,
            tail_cutoff: split.tail_cutoff,
        },
        heads,
        tails,
        pairs,
        prompts,
    })
}
