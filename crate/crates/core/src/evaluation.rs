//! Approximation metrics over grounding-model predictions.
//!
//! Object replacements are scored by IoU against the original target box: a
//! high score means the model kept its answer although the object changed.
//! Context replacements are scored by the best IoU against any annotated box
//! of the target category: a high score means the model still found an
//! instance of the object while ignoring the new context.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{BBox, CaptionRecord, ImageAnnotations};
use crate::error::{Error, Result};
use crate::generator::{DatasetManifest, SampleKind, Strategy};
use crate::jsonl;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub bbox: BBox,
}

pub fn load_predictions(path: &Path) -> Result<BTreeMap<String, BBox>> {
    let records: Vec<PredictionRecord> = jsonl::read(path)?;
    let mut out = BTreeMap::new();
    for r in records {
        if out.insert(r.sample_id.clone(), r.bbox).is_some() {
            return Err(Error::DuplicateKey(r.sample_id));
        }
    }
    Ok(out)
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

pub fn object_replacement_score(pred: &BBox, original_gt: &BBox) -> f64 {
    iou(pred, original_gt)
}

pub fn context_replacement_score(pred: &BBox, category_boxes: &[BBox]) -> Result<f64> {
    category_boxes
        .iter()
        .map(|b| iou(pred, b))
        .reduce(f64::max)
        .ok_or_else(|| Error::MissingCategoryBoxes {
            image_id: "-".into(),
            category: "-".into(),
        })
}

/// Captions whose original-caption prediction reaches `threshold` IoU with
/// the ground truth. An IoU equal to the threshold is kept.
pub fn filter_by_original(
    manifest: &DatasetManifest,
    predictions: &BTreeMap<String, BBox>,
    captions: &BTreeMap<String, CaptionRecord>,
    threshold: f64,
) -> Result<BTreeSet<String>> {
    let mut kept = BTreeSet::new();
    for s in manifest.samples.iter().filter(|s| s.kind == SampleKind::Original) {
        let pred = predictions
            .get(&s.sample_id)
            .ok_or_else(|| Error::MissingPrediction(s.sample_id.clone()))?;
        let caption = captions
            .get(&s.caption_id)
            .ok_or_else(|| Error::Join(format!("manifest caption `{}` not in corpus", s.caption_id)))?;
        if iou(pred, &caption.gt_box) >= threshold {
            kept.insert(s.caption_id.clone());
        }
    }
    Ok(kept)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub sample_id: String,
    pub caption_id: String,
    pub bin: usize,
    pub similarity: f64,
    pub score: f64,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMean {
    pub bin: usize,
    /// `None` when the bin has no rows.
    pub mean: Option<f64>,
    pub count: usize,
}

pub fn per_bin_mean(rows: &[EvaluationRow], k: usize) -> Vec<BinMean> {
    let mut sums = vec![(0.0f64, 0usize); k];
    for r in rows {
        if (1..=k).contains(&r.bin) {
            let slot = &mut sums[r.bin - 1];
            slot.0 += r.score;
            slot.1 += 1;
        }
    }
    sums.into_iter()
        .enumerate()
        .map(|(i, (sum, count))| BinMean {
            bin: i + 1,
            mean: (count > 0).then(|| sum / count as f64),
            count,
        })
        .collect()
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::InsufficientItems {
            needed: 3,
            got: x.len(),
        });
    }
    Ok(())
}

/// Product-moment correlation, clamped to [-1, 1].
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateCorrelation(format!(
            "zero variance in {} over {} values",
            if sxx == 0.0 { "x" } else { "y" },
            x.len()
        )));
    }
    // sqrt(a * a) == a exactly, so identical inputs give exactly 1.
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub pearson: f64,
    pub spearman: f64,
    pub n: usize,
}

pub fn correlate(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    Ok(CorrelationResult {
        pearson: pearson(x, y)?,
        spearman: spearman(x, y)?,
        n: x.len(),
    })
}

/// A correlation, or the reason none is defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorrelationOutcome {
    Computed(CorrelationResult),
    Degenerate { degenerate: String, n: usize },
}

impl CorrelationOutcome {
    fn from_data(x: &[f64], y: &[f64]) -> Result<Self> {
        match correlate(x, y) {
            Ok(c) => Ok(CorrelationOutcome::Computed(c)),
            Err(e @ (Error::DegenerateCorrelation(_) | Error::InsufficientItems { .. })) => {
                Ok(CorrelationOutcome::Degenerate {
                    degenerate: e.to_string(),
                    n: x.len(),
                })
            }
            Err(e) => Err(e),
        }
    }

    pub fn computed(&self) -> Option<&CorrelationResult> {
        match self {
            CorrelationOutcome::Computed(c) => Some(c),
            CorrelationOutcome::Degenerate { .. } => None,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, CorrelationOutcome::Degenerate { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub strategy: Strategy,
    pub k: usize,
    pub rows: Vec<EvaluationRow>,
    pub per_bin: Vec<BinMean>,
    /// Score against raw similarity.
    pub correlation: CorrelationOutcome,
    /// Score against bin index.
    pub bin_index_correlation: CorrelationOutcome,
    pub retained_captions: usize,
    pub excluded_captions: usize,
}

/// Scores every counterfactual sample of captions that pass the
/// original-caption filter, in manifest order.
pub fn evaluate(
    manifest: &DatasetManifest,
    predictions: &BTreeMap<String, BBox>,
    captions: &BTreeMap<String, CaptionRecord>,
    annotations: &BTreeMap<String, ImageAnnotations>,
    threshold: f64,
) -> Result<Evaluation> {
    let strategy = manifest.config().strategy;
    let k = manifest.config().k;
    let kept = filter_by_original(manifest, predictions, captions, threshold)?;
    let originals = manifest
        .samples
        .iter()
        .filter(|s| s.kind == SampleKind::Original)
        .count();

    let mut rows = Vec::new();
    for s in &manifest.samples {
        if s.kind != SampleKind::Counterfactual || !kept.contains(&s.caption_id) {
            continue;
        }
        let (Some(bin), Some(similarity)) = (s.bin, s.similarity) else {
            return Err(Error::validation(&s.sample_id, "counterfactual without bin or similarity"));
        };
        let pred = predictions
            .get(&s.sample_id)
            .ok_or_else(|| Error::MissingPrediction(s.sample_id.clone()))?;
        let caption = &captions[&s.caption_id];
        let score = if s.strategy.replaces_object() {
            object_replacement_score(pred, &caption.gt_box)
        } else {
            let ann = annotations.get(&caption.image_id).ok_or_else(|| {
                Error::Join(format!(
                    "sample `{}`: image `{}` has no annotations",
                    s.sample_id, caption.image_id
                ))
            })?;
            let missing = || Error::MissingCategoryBoxes {
                image_id: caption.image_id.clone(),
                category: caption.category.clone(),
            };
            let boxes = ann.category_boxes.get(&caption.category).ok_or_else(missing)?;
            context_replacement_score(pred, boxes).map_err(|_| missing())?
        };
        rows.push(EvaluationRow {
            sample_id: s.sample_id.clone(),
            caption_id: s.caption_id.clone(),
            bin,
            similarity,
            score,
            strategy: s.strategy,
        });
    }

    let sims: Vec<f64> = rows.iter().map(|r| r.similarity).collect();
    let bins: Vec<f64> = rows.iter().map(|r| r.bin as f64).collect();
    let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
    Ok(Evaluation {
        strategy,
        k,
        per_bin: per_bin_mean(&rows, k),
        correlation: CorrelationOutcome::from_data(&sims, &scores)?,
        bin_index_correlation: CorrelationOutcome::from_data(&bins, &scores)?,
        rows,
        retained_captions: kept.len(),
        excluded_captions: originals - kept.len(),
    })
}

#[derive(Serialize)]
struct CorrelationsFile<'a> {
    strategy: Strategy,
    #[serde(flatten)]
    similarity: &'a CorrelationOutcome,
    bin_index: &'a CorrelationOutcome,
}

/// Contents of a `correlations.json` file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct StoredCorrelations {
    pub strategy: Strategy,
    #[serde(flatten)]
    pub similarity: CorrelationOutcome,
    pub bin_index: CorrelationOutcome,
}

pub fn read_correlations(path: &Path) -> Result<StoredCorrelations> {
    jsonl::read_json(path)
}

pub fn read_per_bin_csv(path: &Path) -> Result<Vec<BinMean>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let field = |i: usize| rec.get(i).unwrap_or("").trim().to_owned();
        let bad = |what: &str| Error::Format(format!("{}: bad {what} in per-bin row {rec:?}", path.display()));
        let bin = field(0).parse().map_err(|_| bad("bin"))?;
        let mean = match field(1).as_str() {
            "" => None,
            m => Some(m.parse().map_err(|_| bad("mean"))?),
        };
        let count = field(2).parse().map_err(|_| bad("count"))?;
        out.push(BinMean { bin, mean, count });
    }
    Ok(out)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

pub fn rows_csv(rows: &[EvaluationRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sample_id", "bin", "similarity", "score"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.sample_id.clone(),
            r.bin.to_string(),
            r.similarity.to_string(),
            r.score.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

pub fn per_bin_csv(per_bin: &[BinMean]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bin", "mean", "count"]).map_err(csv_err)?;
    for b in per_bin {
        w.write_record([
            b.bin.to_string(),
            b.mean.map(|m| m.to_string()).unwrap_or_default(),
            b.count.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

pub fn correlations_json(eval: &Evaluation) -> Result<Vec<u8>> {
    let file = CorrelationsFile {
        strategy: eval.strategy,
        similarity: &eval.correlation,
        bin_index: &eval.bin_index_correlation,
    };
    let mut bytes = serde_json::to_vec_pretty(&file).map_err(|e| Error::Format(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes `rows.csv`, `per_bin.csv` and `correlations.json` into `out_dir`.
pub fn write_evaluation(eval: &Evaluation, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    jsonl::write_bytes(&out_dir.join("rows.csv"), &rows_csv(&eval.rows)?)?;
    jsonl::write_bytes(&out_dir.join("per_bin.csv"), &per_bin_csv(&eval.per_bin)?)?;
    jsonl::write_bytes(&out_dir.join("correlations.json"), &correlations_json(eval)?)
}
