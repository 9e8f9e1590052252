//! Similarity-controlled counterfactual generation.
//!
//! For each caption, every eligible replacement is scored by cosine
//! similarity under one [`Strategy`], assigned to a quantile bin, and one
//! replacement is drawn per bin. A caption with any empty bin is discarded.
//! Retained captions contribute their original plus K edited captions.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ImageAnnotations, SplitCaption};
use crate::error::{Error, Result};
use crate::geometry::{assign_bin, cosine, BinEdges};
use crate::hashing::stable_hash64;
use crate::jsonl;
use crate::provider::EmbeddingProvider;
use crate::report::{histogram, Histogram};
use crate::text::{char_to_byte, normalize, NORMALIZATION_VERSION};
use crate::vocab::{eligible_object_candidates, ContextVocabulary, ObjectVocabulary, OBJECT_EXCLUSION_RULE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Replacement term vs. the caption's object term.
    ObjectWord,
    /// Original caption vs. the caption with its object replaced.
    ObjectSentence,
    /// Original caption vs. the caption with its context replaced.
    Context,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::ObjectWord, Strategy::ObjectSentence, Strategy::Context];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::ObjectWord => "object_word",
            Strategy::ObjectSentence => "object_sentence",
            Strategy::Context => "context",
        }
    }

    pub fn replaces_object(&self) -> bool {
        !matches!(self, Strategy::Context)
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "object_word" => Ok(Strategy::ObjectWord),
            "object_sentence" => Ok(Strategy::ObjectSentence),
            "context" => Ok(Strategy::Context),
            _ => Err(Error::Format(format!(
                "unknown strategy `{s}` (expected object-word, object-sentence or context)"
            ))),
        }
    }
}

/// How one candidate is picked inside a bin.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    Uniform,
    /// Candidate closest to the bin's midpoint; ties go to vocabulary order.
    NearestCenter,
}

impl std::str::FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "uniform" => Ok(Selection::Uniform),
            "nearest_center" => Ok(Selection::NearestCenter),
            _ => Err(Error::Format(format!("unknown selection `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub replacement_text: String,
    pub category: Option<String>,
    pub similarity: f64,
    pub bin: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Original,
    Counterfactual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualSample {
    pub sample_id: String,
    pub caption_id: String,
    pub kind: SampleKind,
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
    pub edited_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement_text: Option<String>,
}

impl CounterfactualSample {
    pub fn sample_id(caption_id: &str, strategy: Strategy, bin: usize) -> String {
        format!("{caption_id}#{strategy}#{bin}")
    }

    fn validate(&self) -> Result<()> {
        let complete = [self.bin.is_some(), self.similarity.is_some(), self.replacement_text.is_some()];
        let ok = match self.kind {
            SampleKind::Original => complete.iter().all(|p| !p),
            SampleKind::Counterfactual => complete.iter().all(|p| *p),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::validation(
                &self.sample_id,
                "optional fields inconsistent with sample kind",
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub strategy: Strategy,
    pub k: usize,
    pub seed: u64,
    pub edges: BinEdges,
    pub provider: String,
    pub normalization_version: String,
    pub selection: Selection,
    pub object_exclusion_rule: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub initial_captions: usize,
    pub discarded_no_head: usize,
    /// Includes `discarded_empty_context`.
    pub discarded_no_replacement: usize,
    pub discarded_empty_context: usize,
    pub retained_captions: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestMeta {
    pub config: GenerationConfig,
    pub stats: GenerationStats,
    /// Similarities of every scored candidate, for comparing the candidate
    /// distribution with the bin edges.
    pub candidate_similarity_histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub meta: ManifestMeta,
    pub samples: Vec<CounterfactualSample>,
}

impl DatasetManifest {
    pub fn config(&self) -> &GenerationConfig {
        &self.meta.config
    }

    pub fn stats(&self) -> &GenerationStats {
        &self.meta.stats
    }

    /// Checks the count identities and re-derives every bin from its
    /// similarity.
    pub fn verify(&self) -> Result<()> {
        let s = &self.meta.stats;
        let k = self.meta.config.k;
        let fail = |msg: String| Err(Error::validation("manifest", msg));
        if s.initial_captions != s.discarded_no_head + s.discarded_no_replacement + s.retained_captions {
            return fail(format!("caption counts do not add up: {s:?}"));
        }
        if self.samples.len() != s.retained_captions * (k + 1) || s.samples != self.samples.len() {
            return fail(format!(
                "{} samples for {} retained captions at k = {k}",
                self.samples.len(),
                s.retained_captions
            ));
        }
        let mut per_caption: BTreeMap<&str, Vec<Option<usize>>> = BTreeMap::new();
        for sample in &self.samples {
            sample.validate()?;
            if let (Some(bin), Some(sim)) = (sample.bin, sample.similarity) {
                let derived = assign_bin(sim, &self.meta.config.edges);
                if derived != bin {
                    return fail(format!(
                        "{}: recorded bin {bin}, similarity {sim} falls in bin {derived}",
                        sample.sample_id
                    ));
                }
            }
            per_caption.entry(&sample.caption_id).or_default().push(sample.bin);
        }
        let expected: Vec<Option<usize>> = std::iter::once(None).chain((1..=k).map(Some)).collect();
        for (caption, mut bins) in per_caption {
            bins.sort();
            if bins != expected {
                return fail(format!("caption `{caption}` has bins {bins:?}"));
            }
        }
        Ok(())
    }
}

/// Replaces the character span `start..end` and normalizes the result.
pub fn splice(caption_text: &str, span: (usize, usize), replacement: &str) -> Result<String> {
    let (start, end) = span;
    let len = caption_text.chars().count();
    let err = Error::Span { start, end, len };
    if start >= end {
        return Err(err);
    }
    let (Some(bs), Some(be)) = (char_to_byte(caption_text, start), char_to_byte(caption_text, end)) else {
        return Err(err);
    };
    Ok(normalize(&format!(
        "{} {} {}",
        &caption_text[..bs],
        replacement,
        &caption_text[be..]
    )))
}

/// Caption with its context replaced by `context`. The object keeps its word
/// position (clamped to the new context's length); substituting the
/// caption's own context returns the normalized caption.
pub fn splice_context(split: &SplitCaption, context: &str) -> String {
    let context = normalize(context);
    if context == split.context_text {
        return split.record.normalized_text();
    }
    let mut words: Vec<&str> = context.split_whitespace().collect();
    let slot = split.object_slot().min(words.len());
    words.insert(slot, &split.object_text);
    words.join(" ")
}

/// Text whose embedding every candidate is compared against.
fn anchor_text(split: &SplitCaption, strategy: Strategy) -> String {
    match strategy {
        Strategy::ObjectWord => split.object_text.clone(),
        Strategy::ObjectSentence | Strategy::Context => split.record.normalized_text(),
    }
}

/// Text embedded for one candidate.
fn probe_text(split: &SplitCaption, candidate: &str, strategy: Strategy) -> Result<String> {
    match strategy {
        Strategy::ObjectWord => Ok(normalize(candidate)),
        Strategy::ObjectSentence => splice(
            &split.record.text,
            (split.object_start, split.object_end),
            candidate,
        ),
        Strategy::Context => {
            if !split.has_context() {
                return Err(Error::validation(
                    &split.record.caption_id,
                    "context strategy needs a non-empty context",
                ));
            }
            Ok(splice_context(split, candidate))
        }
    }
}

/// The caption as it appears in a counterfactual sample.
fn edited_text(split: &SplitCaption, candidate: &str, strategy: Strategy) -> Result<String> {
    match strategy {
        Strategy::Context => Ok(splice_context(split, candidate)),
        _ => splice(
            &split.record.text,
            (split.object_start, split.object_end),
            candidate,
        ),
    }
}

pub fn candidate_similarity(
    split: &SplitCaption,
    candidate_text: &str,
    strategy: Strategy,
    provider: &dyn EmbeddingProvider,
) -> Result<f64> {
    let texts = vec![anchor_text(split, strategy), probe_text(split, candidate_text, strategy)?];
    let embs = provider.embed_batch(&texts)?;
    cosine(&embs[0], &embs[1])
}

/// Scores candidates with one batched provider call. Output follows input
/// order.
pub fn score_candidates(
    split: &SplitCaption,
    candidates: &[(String, Option<String>)],
    strategy: Strategy,
    edges: &BinEdges,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<ScoredCandidate>> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let mut texts = Vec::with_capacity(candidates.len() + 1);
    texts.push(anchor_text(split, strategy));
    for (c, _) in candidates {
        texts.push(probe_text(split, c, strategy)?);
    }
    let embs = provider.embed_batch(&texts)?;
    if embs.len() != texts.len() {
        return Err(Error::Provider(format!(
            "asked for {} embeddings, received {}",
            texts.len(),
            embs.len()
        )));
    }
    candidates
        .iter()
        .zip(&embs[1..])
        .map(|((text, category), emb)| {
            let similarity = cosine(&embs[0], emb)?;
            Ok(ScoredCandidate {
                replacement_text: text.clone(),
                category: category.clone(),
                similarity,
                bin: assign_bin(similarity, edges),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum BinDraw {
    /// One candidate per bin, in bin order.
    Selected(Vec<ScoredCandidate>),
    /// The first bin (1-based) without candidates.
    EmptyBin(usize),
}

pub fn sample_per_bin(candidates: &[ScoredCandidate], edges: &BinEdges, rng_seed: u64) -> BinDraw {
    sample_per_bin_with(candidates, edges, rng_seed, Selection::Uniform)
}

pub fn sample_per_bin_with(
    candidates: &[ScoredCandidate],
    edges: &BinEdges,
    rng_seed: u64,
    selection: Selection,
) -> BinDraw {
    let k = edges.k();
    let mut by_bin: Vec<Vec<&ScoredCandidate>> = vec![Vec::new(); k];
    for c in candidates {
        by_bin[c.bin - 1].push(c);
    }
    if let Some(empty) = by_bin.iter().position(|b| b.is_empty()) {
        return BinDraw::EmptyBin(empty + 1);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let chosen = by_bin
        .iter()
        .enumerate()
        .map(|(i, members)| {
            let pick = match selection {
                Selection::Uniform => members[rng.random_range(0..members.len())],
                Selection::NearestCenter => {
                    let (lo, hi) = edges.interval(i + 1);
                    let center = (lo + hi) / 2.0;
                    members
                        .iter()
                        .copied()
                        .reduce(|best, c| {
                            if (c.similarity - center).abs() < (best.similarity - center).abs() {
                                c
                            } else {
                                best
                            }
                        })
                        .expect("non-empty bin")
                }
            };
            pick.clone()
        })
        .collect();
    BinDraw::Selected(chosen)
}

/// Per-caption draw seed; independent of processing order.
pub fn caption_seed(seed: u64, caption_id: &str, strategy: Strategy) -> u64 {
    stable_hash64(&[&seed.to_le_bytes(), caption_id.as_bytes(), strategy.as_str().as_bytes()])
}

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub strategy: Strategy,
    pub seed: u64,
    pub selection: Selection,
    /// Worker threads; 0 uses the global pool. Output does not depend on it.
    pub jobs: usize,
    /// Captions dropped upstream for lacking a semantic head.
    pub discarded_no_head: usize,
}

impl GenerateOptions {
    pub fn new(strategy: Strategy, seed: u64) -> Self {
        Self {
            strategy,
            seed,
            selection: Selection::Uniform,
            jobs: 0,
            discarded_no_head: 0,
        }
    }
}

enum CaptionOutcome {
    Retained {
        samples: Vec<CounterfactualSample>,
        similarities: Vec<f64>,
    },
    NoReplacement {
        similarities: Vec<f64>,
    },
    EmptyContext,
}

fn process_caption(
    split: &SplitCaption,
    annotations: &BTreeMap<String, ImageAnnotations>,
    objects: &ObjectVocabulary,
    contexts: &ContextVocabulary,
    edges: &BinEdges,
    provider: &dyn EmbeddingProvider,
    opts: &GenerateOptions,
) -> Result<CaptionOutcome> {
    let strategy = opts.strategy;
    let caption_id = &split.record.caption_id;
    let candidates: Vec<(String, Option<String>)> = if strategy.replaces_object() {
        let ann = annotations.get(&split.record.image_id).ok_or_else(|| {
            Error::Join(format!(
                "caption `{caption_id}` refers to image `{}` with no annotations",
                split.record.image_id
            ))
        })?;
        eligible_object_candidates(split, ann, objects)
            .into_iter()
            .map(|e| (e.term.clone(), Some(e.category.clone())))
            .collect()
    } else {
        if !split.has_context() {
            return Ok(CaptionOutcome::EmptyContext);
        }
        contexts
            .entries()
            .iter()
            .filter(|c| **c != split.context_text)
            .map(|c| (c.clone(), None))
            .collect()
    };

    let scored = score_candidates(split, &candidates, strategy, edges, provider)?;
    let similarities: Vec<f64> = scored.iter().map(|c| c.similarity).collect();
    let draw = sample_per_bin_with(&scored, edges, caption_seed(opts.seed, caption_id, strategy), opts.selection);
    let chosen = match draw {
        BinDraw::EmptyBin(_) => return Ok(CaptionOutcome::NoReplacement { similarities }),
        BinDraw::Selected(chosen) => chosen,
    };

    let mut samples = Vec::with_capacity(chosen.len() + 1);
    samples.push(CounterfactualSample {
        sample_id: CounterfactualSample::sample_id(caption_id, strategy, 0),
        caption_id: caption_id.clone(),
        kind: SampleKind::Original,
        strategy,
        bin: None,
        similarity: None,
        edited_text: split.record.text.clone(),
        replacement_text: None,
    });
    for c in chosen {
        samples.push(CounterfactualSample {
            sample_id: CounterfactualSample::sample_id(caption_id, strategy, c.bin),
            caption_id: caption_id.clone(),
            kind: SampleKind::Counterfactual,
            strategy,
            bin: Some(c.bin),
            similarity: Some(c.similarity),
            edited_text: edited_text(split, &c.replacement_text, strategy)?,
            replacement_text: Some(c.replacement_text),
        });
    }
    Ok(CaptionOutcome::Retained { samples, similarities })
}

const HISTOGRAM_BINS: usize = 20;

/// Runs the generation protocol over `splits` in canonical (input) order.
pub fn generate_dataset(
    splits: &[SplitCaption],
    annotations: &BTreeMap<String, ImageAnnotations>,
    objects: &ObjectVocabulary,
    contexts: &ContextVocabulary,
    edges: &BinEdges,
    provider: &dyn EmbeddingProvider,
    opts: &GenerateOptions,
) -> Result<DatasetManifest> {
    let run = || -> Vec<Result<CaptionOutcome>> {
        splits
            .par_iter()
            .map(|s| process_caption(s, annotations, objects, contexts, edges, provider, opts))
            .collect()
    };
    let outcomes = if opts.jobs == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::Format(format!("thread pool: {e}")))?
            .install(run)
    };

    let mut stats = GenerationStats {
        initial_captions: splits.len() + opts.discarded_no_head,
        discarded_no_head: opts.discarded_no_head,
        ..Default::default()
    };
    let mut samples = Vec::new();
    let mut all_similarities = Vec::new();
    for (completed, outcome) in outcomes.into_iter().enumerate() {
        let outcome = outcome.map_err(|e| Error::GenerationAborted {
            completed,
            total: splits.len(),
            source: Box::new(e),
        })?;
        match outcome {
            CaptionOutcome::Retained {
                samples: s,
                similarities,
            } => {
                stats.retained_captions += 1;
                samples.extend(s);
                all_similarities.extend(similarities);
            }
            CaptionOutcome::NoReplacement { similarities } => {
                stats.discarded_no_replacement += 1;
                all_similarities.extend(similarities);
            }
            CaptionOutcome::EmptyContext => {
                stats.discarded_no_replacement += 1;
                stats.discarded_empty_context += 1;
            }
        }
    }
    stats.samples = samples.len();

    let hist = histogram(&all_similarities, HISTOGRAM_BINS, (-1.0, 1.0));
    log::info!(
        "{}: {} candidate similarities scored; retained {} of {} captions",
        opts.strategy,
        all_similarities.len(),
        stats.retained_captions,
        stats.initial_captions
    );

    Ok(DatasetManifest {
        meta: ManifestMeta {
            config: GenerationConfig {
                strategy: opts.strategy,
                k: edges.k(),
                seed: opts.seed,
                edges: edges.clone(),
                provider: provider.identity(),
                normalization_version: NORMALIZATION_VERSION.to_owned(),
                selection: opts.selection,
                object_exclusion_rule: OBJECT_EXCLUSION_RULE.to_owned(),
            },
            stats,
            candidate_similarity_histogram: hist,
        },
        samples,
    })
}

/// `manifest.jsonl` → `manifest.meta.json`.
pub fn meta_path(manifest_path: &Path) -> PathBuf {
    let name = manifest_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = name.strip_suffix(".jsonl").unwrap_or(&name);
    manifest_path.with_file_name(format!("{stem}.meta.json"))
}

/// Serialized JSONL samples and pretty JSON metadata.
pub fn manifest_bytes(manifest: &DatasetManifest) -> Result<(Vec<u8>, Vec<u8>)> {
    let samples = jsonl::to_bytes(&manifest.samples)?;
    let mut meta = serde_json::to_vec_pretty(&manifest.meta).map_err(|e| Error::Format(e.to_string()))?;
    meta.push(b'\n');
    Ok((samples, meta))
}

pub fn write_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let (samples, meta) = manifest_bytes(manifest)?;
    jsonl::write_bytes(&meta_path(path), &meta)?;
    jsonl::write_bytes(path, &samples)
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let meta: ManifestMeta = jsonl::read_json(&meta_path(path))?;
    let samples: Vec<CounterfactualSample> = jsonl::read(path)?;
    for s in &samples {
        s.validate()?;
    }
    Ok(DatasetManifest { meta, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{BBox, CaptionRecord};
    use crate::provider::SyntheticProvider;

    fn split(text: &str, start: usize, end: usize) -> SplitCaption {
        SplitCaption::new(
            CaptionRecord {
                caption_id: "c1".into(),
                image_id: "img".into(),
                text: text.into(),
                gt_box: BBox::new(0.0, 0.0, 1.0, 1.0).unwrap(),
                category: "car".into(),
            },
            start,
            end,
        )
        .unwrap()
    }

    fn cand(text: &str, similarity: f64, bin: usize) -> ScoredCandidate {
        ScoredCandidate {
            replacement_text: text.into(),
            category: None,
            similarity,
            bin,
        }
    }

    fn edges5() -> BinEdges {
        BinEdges::from_interior(&[0.2, 0.4, 0.6, 0.8]).unwrap()
    }

    #[test]
    fn splice_examples() {
        assert_eq!(splice("red car on road", (4, 7), "truck").unwrap(), "red truck on road");
        assert_eq!(splice("Red  car on road", (5, 8), "car").unwrap(), "red car on road");
        assert_eq!(splice("teddy bear on couch", (0, 10), "dog").unwrap(), "dog on couch");
        assert!(matches!(splice("abc", (2, 9), "x"), Err(Error::Span { .. })));
        assert!(matches!(splice("abc", (2, 2), "x"), Err(Error::Span { .. })));
    }

    #[test]
    fn context_splice_keeps_object_slot() {
        let s = split("left red car near the tree", 9, 12);
        assert_eq!(splice_context(&s, "left red near the tree"), "left red car near the tree");
        assert_eq!(splice_context(&s, "big on the right"), "big on car the right");
        assert_eq!(splice_context(&s, "striped"), "striped car");
    }

    #[test]
    fn identity_splices_score_one() {
        let p = SyntheticProvider::new(4, 32).unwrap();
        let s = split("teddy bear on the couch", 0, 10);
        let sent = candidate_similarity(&s, "teddy bear", Strategy::ObjectSentence, &p).unwrap();
        assert!((sent - 1.0).abs() < 1e-6);
        let ctx = candidate_similarity(&s, "on the couch", Strategy::Context, &p).unwrap();
        assert!((ctx - 1.0).abs() < 1e-6);
    }

    #[test]
    fn word_similarity_matches_direct_cosine() {
        let p = SyntheticProvider::new(4, 32).unwrap();
        let s = split("teddy bear on the couch", 0, 10);
        let got = candidate_similarity(&s, "giraffe", Strategy::ObjectWord, &p).unwrap();
        let a = p.embed_one("giraffe").unwrap();
        let b = p.embed_one("teddy bear").unwrap();
        let dot: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
        assert!((got - dot / (a.norm() * b.norm())).abs() < 1e-12);
    }

    #[test]
    fn context_strategy_requires_context() {
        let p = SyntheticProvider::new(4, 8).unwrap();
        let s = split("dog", 0, 3);
        assert!(candidate_similarity(&s, "on the left", Strategy::Context, &p).is_err());
    }

    #[test]
    fn forced_choice_ignores_seed() {
        let cands: Vec<_> = (1..=5).map(|b| cand(&format!("c{b}"), 0.1 + 0.2 * (b - 1) as f64, b)).collect();
        for seed in [0, 1, 99] {
            assert_eq!(sample_per_bin(&cands, &edges5(), seed), BinDraw::Selected(cands.clone()));
        }
    }

    #[test]
    fn empty_bin_reported() {
        let cands = vec![cand("a", 0.1, 1), cand("b", 0.3, 2), cand("d", 0.7, 4), cand("e", 0.9, 5)];
        assert_eq!(sample_per_bin(&cands, &edges5(), 0), BinDraw::EmptyBin(3));
    }

    #[test]
    fn nearest_center_selection() {
        let mut cands: Vec<_> = (1..=5).map(|b| cand(&format!("c{b}"), 0.01 + 0.2 * (b - 1) as f64, b)).collect();
        cands.push(cand("mid3", 0.5, 3));
        cands.push(cand("also-mid3", 0.5, 3));
        match sample_per_bin_with(&cands, &edges5(), 0, Selection::NearestCenter) {
            BinDraw::Selected(chosen) => assert_eq!(chosen[2].replacement_text, "mid3"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sample_ids_and_meta_path() {
        assert_eq!(CounterfactualSample::sample_id("c9", Strategy::Context, 3), "c9#context#3");
        assert_eq!(meta_path(Path::new("/x/manifest.jsonl")), PathBuf::from("/x/manifest.meta.json"));
        assert_eq!(meta_path(Path::new("out")), PathBuf::from("out.meta.json"));
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("object-word".parse::<Strategy>().unwrap(), Strategy::ObjectWord);
        assert_eq!("object_sentence".parse::<Strategy>().unwrap(), Strategy::ObjectSentence);
        assert!("word".parse::<Strategy>().is_err());
    }
}
