//! Head/tail concept-pair benchmark construction from caption corpora.
//!
//! Concepts come from a fixed vocabulary and are counted once per caption.
//! Pairs join frequent and rare concepts that seldom appear together.

mod error;
mod graph;
mod prompts;
mod select;
mod spec;
mod vocab;

pub use error::{Error, Result};
pub use graph::ConceptGraph;
pub use prompts::{gen_prompts, TemplateSet, PROMPTS_PER_PAIR};
pub use select::{select_representatives, split_head_tail, topk_min_edges, ConceptPair, HeadTailSplit};
pub use spec::{build_benchmark, BenchmarkSpec, BuildParams, Corpus, SpecParams, SCHEMA_VERSION};
pub use vocab::{tokenize, ConceptVocabulary};
