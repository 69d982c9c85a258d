use std::io::BufRead;

use crate::select::ConceptPair;
use crate::{Error, Result};

pub const PROMPTS_PER_PAIR: usize = 5;

/// Prompt templates with `{head}` and `{tail}` slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: Vec<String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self {
            templates: [
                "a photo of a {head} and a {tail}",
                "a {tail} next to a {head}",
                "a painting of a {head} together with a {tail}",
                "a {head} and a {tail} in the same scene",
                "a close-up picture of a {tail} beside a {head}",
            ]
            .iter()
            .map(|t| t.to_string())
            .collect(),
        }
    }
}

impl TemplateSet {
    pub fn new<I, S>(templates: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let templates: Vec<String> = templates.into_iter().map(Into::into).collect();
        if templates.len() < PROMPTS_PER_PAIR {
            return Err(Error::Config(format!(
                "need at least {PROMPTS_PER_PAIR} templates, got {}",
                templates.len()
            )));
        }
        for (i, t) in templates.iter().enumerate() {
            if !t.contains("{head}") || !t.contains("{tail}") {
                return Err(Error::Config(format!("template {} lacks a {{head}} or {{tail}} slot: '{t}'", i + 1)));
            }
        }
        Ok(Self { templates })
    }

    /// One template per line; blank lines and `#` comments are skipped.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut out = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| Error::Io { line: Some(i + 1), source })?;
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                out.push(t.to_string());
            }
        }
        Self::new(out)
    }

    pub fn templates(&self) -> &[String] {
        &self.templates
    }
}

/// First five templates filled with the pair.
pub fn gen_prompts(pair: &ConceptPair, templates: &TemplateSet) -> [String; PROMPTS_PER_PAIR] {
    std::array::from_fn(|i| {
        templates.templates[i]
            .replace("{head}", &pair.head)
            .replace("{tail}", &pair.tail)
    })
}
