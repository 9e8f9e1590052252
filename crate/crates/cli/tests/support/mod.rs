#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

pub const PROVIDER: &str = "synthetic:7:64:0.8";

const OBJECTS: &[(&str, &[&str])] = &[
    ("person", &["man", "woman", "kid"]),
    ("dog", &["puppy", "hound"]),
    ("cat", &["kitty"]),
    ("car", &["sedan"]),
    ("horse", &["pony"]),
    ("chair", &["seat", "stool"]),
    ("couch", &["sofa"]),
    ("teddy bear", &["teddy"]),
    ("bicycle", &["bike"]),
    ("boat", &["ship"]),
    ("umbrella", &[]),
    ("laptop", &[]),
    ("pizza", &[]),
    ("cup", &["mug"]),
    ("giraffe", &[]),
    ("zebra", &[]),
];
const LEFT: &[&str] = &["", "left ", "red ", "small ", "tall "];
const RIGHT: &[&str] = &["", " on the right", " near the window", " in the middle", " at the back", " under the tree"];

/// Writes a small corpus: captions, image annotations, parses and synonyms.
pub fn write_corpus(dir: &Path, n: usize) {
    let mut corpus = String::new();
    let mut images = String::new();
    let mut parses = String::new();
    for i in 0..n {
        let (category, synonyms) = OBJECTS[(i * 7) % OBJECTS.len()];
        let term = if synonyms.is_empty() || i % 2 == 0 { category } else { synonyms[i % synonyms.len()] };
        let left = LEFT[i % LEFT.len()];
        let right = RIGHT[(i / 3) % RIGHT.len()];
        let text = format!("{left}{term}{right}");
        let start = left.chars().count();
        let x = (i * 13 % 400) as f64;
        let gt = [x, 10.0, x + 50.0 + (i % 7) as f64, 90.0];
        let other = OBJECTS[(i * 7 + 5) % OBJECTS.len()].0;
        corpus += &format!("{}\n", json!({"caption_id": format!("c{i:03}"), "image_id": format!("i{i:03}"), "text": text, "bbox": gt, "category": category}));
        images += &format!(
            "{}\n",
            json!({"image_id": format!("i{i:03}"), "width": 640, "height": 480, "categories": [category, other],
                   "boxes": {category: [gt, [500.0, 300.0, 600.0, 400.0]], other: [[0.0, 200.0, 100.0, 300.0]]}})
        );
        let parse = if i % 11 == 4 {
            json!({"caption_id": format!("c{i:03}"), "status": "no_head"})
        } else {
            json!({"caption_id": format!("c{i:03}"), "status": "ok", "object_start": start, "object_end": start + term.chars().count(), "head": term})
        };
        parses += &format!("{parse}\n");
    }
    let vocab: serde_json::Map<String, Value> = OBJECTS.iter().map(|(c, s)| (c.to_string(), json!(s))).collect();
    std::fs::write(dir.join("corpus.jsonl"), corpus).unwrap();
    std::fs::write(dir.join("images.jsonl"), images).unwrap();
    std::fs::write(dir.join("parses.jsonl"), parses).unwrap();
    std::fs::write(dir.join("vocab.json"), Value::Object(vocab).to_string()).unwrap();
}

pub fn cfground(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfground"))
        .current_dir(dir)
        .args(args)
        .env_remove("CFGROUND_SIDECAR")
        .output()
        .unwrap()
}

pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = cfground(dir, args);
    assert!(
        out.status.success(),
        "cfground {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn json_file(path: impl AsRef<Path>) -> Value {
    let p = path.as_ref();
    serde_json::from_str(&std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))).unwrap()
}

/// anisotropy then edges, with the defaults.
pub fn prepare_edges(dir: &Path) -> PathBuf {
    ok(dir, &["anisotropy", "--corpus", "corpus.jsonl", "--provider", PROVIDER, "--seed", "1", "--out", "dist.json"]);
    ok(dir, &["edges", "--dist", "dist.json", "--k", "5", "--out", "edges.json"]);
    dir.join("edges.json")
}

pub fn generate_args<'a>(strategy: &'a str, out: &'a str, jobs: &'a str) -> Vec<&'a str> {
    vec![
        "generate", "--strategy", strategy, "--k", "5", "--seed", "3", "--edges", "edges.json", "--corpus", "corpus.jsonl",
        "--images", "images.jsonl", "--parses", "parses.jsonl", "--vocab", "vocab.json", "--provider", PROVIDER,
        "--jobs", jobs, "--out", out,
    ]
}

/// Ground truth for originals; a box narrowed by similarity otherwise.
pub fn write_predictions(dir: &Path, manifest: &str, out: &str) {
    let corpus: std::collections::BTreeMap<String, Value> = std::fs::read_to_string(dir.join("corpus.jsonl"))
        .unwrap()
        .lines()
        .map(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            (v["caption_id"].as_str().unwrap().to_string(), v)
        })
        .collect();
    let mut lines = String::new();
    for line in std::fs::read_to_string(dir.join(manifest)).unwrap().lines() {
        let s: Value = serde_json::from_str(line).unwrap();
        let gt: Vec<f64> = serde_json::from_value(corpus[s["caption_id"].as_str().unwrap()]["bbox"].clone()).unwrap();
        let bbox = match s["similarity"].as_f64() {
            None => gt.clone(),
            Some(sim) => vec![gt[0], gt[1], gt[0] + (gt[2] - gt[0]) * (0.05 + 0.9 * sim.clamp(0.0, 1.0)), gt[3]],
        };
        lines += &format!("{}\n", json!({"sample_id": s["sample_id"], "bbox": bbox}));
    }
    std::fs::write(dir.join(out), lines).unwrap();
}
