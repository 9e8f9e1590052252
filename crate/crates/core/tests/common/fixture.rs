//! A small synthetic RefCOCO+-shaped corpus.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use cfground::corpus::{BBox, CaptionRecord, ImageAnnotations, ParseResult, ParseStatus};
use cfground::jsonl;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub const CATEGORIES: &[(&str, &[&str])] = &[
    ("person", &["man", "woman", "guy", "lady", "kid"]),
    ("dog", &["puppy", "canine", "hound"]),
    ("cat", &["kitty", "feline"]),
    ("car", &["automobile", "sedan"]),
    ("bus", &["coach"]),
    ("truck", &["lorry", "pickup"]),
    ("horse", &["pony", "stallion"]),
    ("sheep", &["lamb", "ewe"]),
    ("cow", &["cattle", "calf"]),
    ("elephant", &[]),
    ("bear", &[]),
    ("zebra", &[]),
    ("giraffe", &[]),
    ("chair", &["seat", "stool"]),
    ("couch", &["sofa"]),
    ("bed", &[]),
    ("teddy bear", &["teddy"]),
    ("bicycle", &["bike"]),
    ("motorcycle", &["motorbike"]),
    ("airplane", &["plane", "jet"]),
    ("boat", &["ship"]),
    ("bench", &[]),
    ("umbrella", &["parasol"]),
    ("laptop", &["notebook"]),
    ("pizza", &[]),
    ("donut", &["doughnut"]),
    ("cake", &[]),
    ("bottle", &[]),
    ("cup", &["mug"]),
    ("vase", &[]),
];

const ADJECTIVES: &[&str] = &["", "left", "red", "small", "tall", "striped", "white", "closest"];
const RELATIONS: &[&str] = &[
    "",
    "on the right",
    "near the window",
    "behind the fence",
    "in the middle",
    "next to the table",
    "at the back",
    "under the tree",
];

pub struct Fixture {
    pub captions: Vec<CaptionRecord>,
    pub parses: Vec<ParseResult>,
    pub images: BTreeMap<String, ImageAnnotations>,
    pub synonyms: BTreeMap<String, Vec<String>>,
}

pub fn synonyms() -> BTreeMap<String, Vec<String>> {
    CATEGORIES
        .iter()
        .map(|(c, s)| (c.to_string(), s.iter().map(|t| t.to_string()).collect()))
        .collect()
}

pub fn categories() -> Vec<String> {
    CATEGORIES.iter().map(|(c, _)| c.to_string()).collect()
}

/// `n` captions, two per image, with a few headless and multi-head parses.
pub fn build(n: usize, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut captions = Vec::new();
    let mut parses = Vec::new();
    let mut images: BTreeMap<String, ImageAnnotations> = BTreeMap::new();

    for i in 0..n {
        let image_id = format!("img{:03}", i / 2);
        let caption_id = format!("cap{i:03}");
        let (category, terms) = CATEGORIES[rng.random_range(0..CATEGORIES.len())];
        let ann = images.entry(image_id.clone()).or_insert_with(|| {
            let mut cats = BTreeSet::new();
            for _ in 0..rng.random_range(1..3) {
                cats.insert(CATEGORIES[rng.random_range(0..CATEGORIES.len())].0.to_string());
            }
            let category_boxes = cats
                .iter()
                .map(|c| (c.clone(), vec![BBox::new(300.0, 200.0, 400.0, 300.0).unwrap()]))
                .collect();
            ImageAnnotations {
                image_id: image_id.clone(),
                width: 640,
                height: 480,
                categories: cats,
                category_boxes,
            }
        });

        let x = rng.random_range(0.0..500.0f64).floor();
        let y = rng.random_range(0.0..350.0f64).floor();
        let gt = BBox::new(x, y, x + rng.random_range(20.0..140.0f64).floor(), y + rng.random_range(20.0..130.0f64).floor()).unwrap();
        ann.categories.insert(category.to_string());
        ann.category_boxes.entry(category.to_string()).or_default().push(gt);

        let term = if terms.is_empty() || rng.random_bool(0.5) {
            category
        } else {
            terms[rng.random_range(0..terms.len())]
        };
        let adj = ADJECTIVES[rng.random_range(0..ADJECTIVES.len())];
        let rel = RELATIONS[rng.random_range(0..RELATIONS.len())];
        let prefix = if adj.is_empty() { String::new() } else { format!("{adj} ") };
        let text = format!("{prefix}{term} {rel}").trim().to_string();
        let start = prefix.chars().count();
        let end = start + term.chars().count();

        let parse = match i % 17 {
            5 => ParseResult {
                caption_id: caption_id.clone(),
                status: ParseStatus::NoHead,
                object_start: None,
                object_end: None,
                head_text: None,
            },
            11 => ParseResult {
                caption_id: caption_id.clone(),
                status: ParseStatus::MultiHead,
                object_start: None,
                object_end: None,
                head_text: None,
            },
            _ => ParseResult {
                caption_id: caption_id.clone(),
                status: ParseStatus::Ok,
                object_start: Some(start),
                object_end: Some(end),
                head_text: Some(term.to_string()),
            },
        };
        captions.push(CaptionRecord {
            caption_id,
            image_id,
            text,
            gt_box: gt,
            category: category.to_string(),
        });
        parses.push(parse);
    }
    Fixture {
        captions,
        parses,
        images,
        synonyms: synonyms(),
    }
}

impl Fixture {
    /// Writes corpus.jsonl, images.jsonl, parses.jsonl and vocab.json.
    pub fn write(&self, dir: &Path) {
        jsonl::write(&dir.join("corpus.jsonl"), &self.captions).unwrap();
        jsonl::write(&dir.join("parses.jsonl"), &self.parses).unwrap();
        let images: Vec<_> = self.images.values().collect();
        jsonl::write(&dir.join("images.jsonl"), &images).unwrap();
        std::fs::write(dir.join("vocab.json"), json!(self.synonyms).to_string()).unwrap();
    }
}
