#![allow(dead_code)]

pub mod fixture;
pub mod oracles;

use cfground::corpus::{apply_parses, SplitCaption};
use cfground::geometry::{anisotropy, bin_edges, BinEdges};
use cfground::provider::{EmbeddingProvider, SyntheticProvider};
use cfground::vocab::{build_context_vocab, build_object_vocab, ContextVocabulary, ObjectVocabulary};

/// Synthetic provider with a mean pairwise cosine near 0.4.
pub fn anisotropic_provider(seed: u64) -> SyntheticProvider {
    SyntheticProvider::with_bias(seed, 64, 0.8).unwrap()
}

pub struct Prepared {
    pub fixture: fixture::Fixture,
    pub splits: Vec<SplitCaption>,
    pub no_head: usize,
    pub objects: ObjectVocabulary,
    pub contexts: ContextVocabulary,
    pub edges: BinEdges,
}

/// Fixture corpus plus vocabularies and caption-pair quantile edges.
pub fn prepare(n: usize, seed: u64, provider: &dyn EmbeddingProvider, k: usize) -> Prepared {
    let fixture = fixture::build(n, seed);
    let (splits, no_head) = apply_parses(&fixture.captions, &fixture.parses).unwrap();
    let objects = build_object_vocab(&fixture::categories(), &fixture.synonyms).unwrap();
    let contexts = build_context_vocab(&splits);
    let texts: Vec<String> = fixture.captions.iter().map(|c| c.normalized_text()).collect();
    let embs = provider.embed_batch(&texts).unwrap();
    let (_, dist) = anisotropy(&embs, 50_000, seed).unwrap();
    let edges = bin_edges(&dist, k).unwrap();
    Prepared {
        fixture,
        splits,
        no_head,
        objects,
        contexts,
        edges,
    }
}

use std::collections::BTreeMap;

use cfground::corpus::{BBox, CaptionRecord};
use cfground::generator::{CounterfactualSample, DatasetManifest, SampleKind};

pub fn caption_index(captions: &[CaptionRecord]) -> BTreeMap<String, CaptionRecord> {
    captions.iter().map(|c| (c.caption_id.clone(), c.clone())).collect()
}

/// Every caption gets the same ground-truth box, so equal similarities map
/// to bitwise-equal IoUs under [`monotone_rule`].
pub fn shared_gt(captions: &[CaptionRecord]) -> BTreeMap<String, CaptionRecord> {
    let mut index = caption_index(captions);
    for c in index.values_mut() {
        c.gt_box = BBox::new(0.0, 0.0, 128.0, 64.0).unwrap();
    }
    index
}

/// Predictions from a per-sample rule.
pub fn predict<F>(manifest: &DatasetManifest, captions: &BTreeMap<String, CaptionRecord>, rule: F) -> BTreeMap<String, BBox>
where
    F: Fn(&CounterfactualSample, &CaptionRecord) -> BBox,
{
    manifest
        .samples
        .iter()
        .map(|s| (s.sample_id.clone(), rule(s, &captions[&s.caption_id])))
        .collect()
}

/// Ground truth for the original, and for counterfactuals the ground truth
/// narrowed so its IoU with the full box is 0.05 + 0.9 * similarity.
pub fn monotone_rule(s: &CounterfactualSample, c: &CaptionRecord) -> BBox {
    let g = c.gt_box;
    match s.kind {
        SampleKind::Original => g,
        SampleKind::Counterfactual => {
            let f = 0.05 + 0.9 * s.similarity.unwrap().clamp(0.0, 1.0);
            BBox::new(g.x_min(), g.y_min(), g.x_min() + (g.x_max() - g.x_min()) * f, g.y_max()).unwrap()
        }
    }
}
