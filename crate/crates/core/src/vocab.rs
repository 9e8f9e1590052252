//! Object and context vocabularies, and per-caption candidate eligibility.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{ImageAnnotations, SplitCaption};
use crate::error::{Error, Result};
use crate::jsonl;
use crate::text::normalize;

/// Candidate exclusion rule recorded in manifest metadata.
pub const OBJECT_EXCLUSION_RULE: &str =
    "exclude entries whose category is annotated in the image, and the caption's own object term (exact normalized match)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectEntry {
    pub term: String,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectVocabulary {
    entries: Vec<ObjectEntry>,
}

impl ObjectVocabulary {
    pub fn entries(&self) -> &[ObjectEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        jsonl::write(path, &self.entries)
    }
}

/// Categories first, then each category's synonyms in category order.
/// Terms are normalized; the first occurrence of a term keeps its category.
pub fn build_object_vocab(
    categories: &[String],
    synonyms: &BTreeMap<String, Vec<String>>,
) -> Result<ObjectVocabulary> {
    if categories.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    let mut push = |term: &str, category: &str, entries: &mut Vec<ObjectEntry>| {
        let term = normalize(term);
        if !term.is_empty() && seen.insert(term.clone()) {
            entries.push(ObjectEntry {
                term,
                category: category.to_owned(),
            });
        }
    };
    let categories: Vec<String> = categories.iter().map(|c| normalize(c)).collect();
    for c in &categories {
        push(c, c, &mut entries);
    }
    let synonyms: BTreeMap<String, &Vec<String>> =
        synonyms.iter().map(|(k, v)| (normalize(k), v)).collect();
    for c in &categories {
        if let Some(terms) = synonyms.get(c) {
            for t in terms.iter() {
                push(t, c, &mut entries);
            }
        }
    }
    Ok(ObjectVocabulary { entries })
}

/// Reads a synonyms file: `{"category": ["term", ...], ...}`.
pub fn load_synonyms(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    jsonl::read_json(path)
}

/// Object vocabulary from a synonyms file; its keys are the categories.
pub fn load_object_vocab(path: &Path) -> Result<ObjectVocabulary> {
    let synonyms = load_synonyms(path)?;
    let categories: Vec<String> = synonyms.keys().cloned().collect();
    build_object_vocab(&categories, &synonyms)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextVocabulary {
    entries: Vec<String>,
}

impl ContextVocabulary {
    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            context: &'a str,
        }
        let rows: Vec<Row> = self.entries.iter().map(|c| Row { context: c }).collect();
        jsonl::write(path, &rows)
    }
}

/// Distinct non-empty contexts in first-occurrence order.
pub fn build_context_vocab(splits: &[SplitCaption]) -> ContextVocabulary {
    let mut seen = HashSet::new();
    let entries = splits
        .iter()
        .map(|s| s.context_text.clone())
        .filter(|c| !c.is_empty() && seen.insert(c.clone()))
        .collect();
    ContextVocabulary { entries }
}

/// Vocabulary entries usable as counterfactual objects for this caption.
pub fn eligible_object_candidates<'v>(
    split: &SplitCaption,
    annotations: &ImageAnnotations,
    vocab: &'v ObjectVocabulary,
) -> Vec<&'v ObjectEntry> {
    vocab
        .entries
        .iter()
        .filter(|e| !annotations.categories.contains(&e.category) && e.term != split.object_text)
        .collect()
}
