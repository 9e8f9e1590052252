//! Captions, image annotations and dependency-parse results, and the
//! object/context split derived from them.
//!
//! Boxes are stored in corner form `[x_min, y_min, x_max, y_max]`. A JSONL
//! file may start with a header line `{"bbox_format": "xywh"}` to declare
//! `[x, y, w, h]` boxes, which are converted on load.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::text::{char_to_byte, collapse_whitespace, normalize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;

    fn try_from(c: [f64; 4]) -> Result<Self> {
        BBox::new(c[0], c[1], c[2], c[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let coords = [x_min, y_min, x_max, y_max];
        if coords.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Format(format!(
                "box {coords:?} has negative or non-finite coordinates"
            )));
        }
        if x_max <= x_min || y_max <= y_min {
            return Err(Error::Format(format!("box {coords:?} has no area")));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(x, y, x + w, y + h)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn y_min(&self) -> f64 {
        self.y_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    /// Area of the overlap with `other`, 0 when disjoint or touching.
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn within(&self, width: f64, height: f64) -> bool {
        self.x_max <= width && self.y_max <= height
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self> {
        Self::new(
            self.x_min + dx,
            self.y_min + dy,
            self.x_max + dx,
            self.y_max + dy,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoxFormat {
    Xyxy,
    Xywh,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileHeader {
    bbox_format: BoxFormat,
}

/// Splits a header line off a JSONL file, if present.
fn box_format_and_body(path: &Path) -> Result<(BoxFormat, Vec<(usize, serde_json::Value)>)> {
    let mut values = jsonl::read_values(path)?;
    let header = values
        .first()
        .filter(|(_, v)| v.get("bbox_format").is_some())
        .map(|(line, v)| jsonl::decode::<FileHeader>(path, *line, v.clone()))
        .transpose()?;
    match header {
        Some(h) => {
            values.remove(0);
            Ok((h.bbox_format, values))
        }
        None => Ok((BoxFormat::Xyxy, values)),
    }
}

fn convert_box(raw: [f64; 4], format: BoxFormat) -> Result<BBox> {
    match format {
        BoxFormat::Xyxy => BBox::try_from(raw),
        BoxFormat::Xywh => BBox::from_xywh(raw[0], raw[1], raw[2], raw[3]),
    }
}

/// A referring expression with its target box and category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaptionRecord {
    pub caption_id: String,
    pub image_id: String,
    pub text: String,
    #[serde(rename = "bbox")]
    pub gt_box: BBox,
    pub category: String,
}

#[derive(Deserialize)]
struct RawCaption {
    caption_id: String,
    image_id: String,
    text: String,
    bbox: [f64; 4],
    category: String,
}

impl CaptionRecord {
    pub fn normalized_text(&self) -> String {
        normalize(&self.text)
    }
}

pub fn load_captions(path: &Path) -> Result<Vec<CaptionRecord>> {
    let (format, body) = box_format_and_body(path)?;
    body.into_iter()
        .map(|(line, value)| {
            let raw: RawCaption = jsonl::decode(path, line, value)?;
            let gt_box = convert_box(raw.bbox, format)
                .map_err(|e| Error::validation(&raw.caption_id, e.to_string()))?;
            if normalize(&raw.text).is_empty() {
                return Err(Error::validation(&raw.caption_id, "empty caption text"));
            }
            let category = normalize(&raw.category);
            if category.is_empty() {
                return Err(Error::validation(&raw.caption_id, "empty category"));
            }
            Ok(CaptionRecord {
                caption_id: raw.caption_id,
                image_id: raw.image_id,
                text: raw.text,
                gt_box,
                category,
            })
        })
        .collect()
}

/// Ground-truth annotations of one image.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageAnnotations {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub categories: BTreeSet<String>,
    #[serde(rename = "boxes")]
    pub category_boxes: BTreeMap<String, Vec<BBox>>,
}

#[derive(Deserialize)]
struct RawImage {
    image_id: String,
    width: u32,
    height: u32,
    categories: Vec<String>,
    #[serde(default)]
    boxes: BTreeMap<String, Vec<[f64; 4]>>,
}

impl ImageAnnotations {
    fn from_raw(raw: RawImage, format: BoxFormat) -> Result<Self> {
        let id = raw.image_id;
        let categories: BTreeSet<String> = raw.categories.iter().map(|c| normalize(c)).collect();
        let mut category_boxes = BTreeMap::new();
        for (cat, raw_boxes) in raw.boxes {
            let cat = normalize(&cat);
            if !categories.contains(&cat) {
                return Err(Error::validation(
                    &id,
                    format!("boxes given for unlisted category `{cat}`"),
                ));
            }
            let mut boxes = Vec::with_capacity(raw_boxes.len());
            for rb in raw_boxes {
                let b = convert_box(rb, format).map_err(|e| Error::validation(&id, e.to_string()))?;
                if !b.within(f64::from(raw.width), f64::from(raw.height)) {
                    return Err(Error::validation(
                        &id,
                        format!(
                            "box {:?} outside image bounds {}x{}",
                            <[f64; 4]>::from(b),
                            raw.width,
                            raw.height
                        ),
                    ));
                }
                boxes.push(b);
            }
            category_boxes.entry(cat).or_insert_with(Vec::new).extend(boxes);
        }
        Ok(Self {
            image_id: id,
            width: raw.width,
            height: raw.height,
            categories,
            category_boxes,
        })
    }
}

pub fn load_image_annotations(path: &Path) -> Result<BTreeMap<String, ImageAnnotations>> {
    let (format, body) = box_format_and_body(path)?;
    let mut out = BTreeMap::new();
    for (line, value) in body {
        let raw: RawImage = jsonl::decode(path, line, value)?;
        let ann = ImageAnnotations::from_raw(raw, format)?;
        if out.contains_key(&ann.image_id) {
            return Err(Error::DuplicateKey(ann.image_id));
        }
        out.insert(ann.image_id.clone(), ann);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Ok,
    NoHead,
    MultiHead,
}

/// Semantic-head span of one caption, in character offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseResult {
    pub caption_id: String,
    pub status: ParseStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_end: Option<usize>,
    #[serde(default, rename = "head", skip_serializing_if = "Option::is_none")]
    pub head_text: Option<String>,
}

pub fn load_parses(path: &Path) -> Result<Vec<ParseResult>> {
    jsonl::read(path)
}

/// A caption divided into its object span and the remaining context.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCaption {
    pub record: CaptionRecord,
    /// Character offsets of the object span in `record.text`.
    pub object_start: usize,
    pub object_end: usize,
    pub object_text: String,
    pub context_text: String,
    prefix: String,
    suffix: String,
}

impl SplitCaption {
    pub fn new(record: CaptionRecord, object_start: usize, object_end: usize) -> Result<Self> {
        let len = record.text.chars().count();
        let span_err = || Error::Span {
            start: object_start,
            end: object_end,
            len,
        };
        if object_start >= object_end {
            return Err(span_err());
        }
        let (Some(bs), Some(be)) = (
            char_to_byte(&record.text, object_start),
            char_to_byte(&record.text, object_end),
        ) else {
            return Err(span_err());
        };
        let prefix = normalize(&record.text[..bs]);
        let object_text = normalize(&record.text[bs..be]);
        let suffix = normalize(&record.text[be..]);
        if object_text.is_empty() {
            return Err(Error::validation(&record.caption_id, "object span is blank"));
        }
        let context_text = collapse_whitespace(&format!("{prefix} {suffix}"));
        Ok(Self {
            record,
            object_start,
            object_end,
            object_text,
            context_text,
            prefix,
            suffix,
        })
    }

    /// Normalized context words before the object.
    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    /// Normalized context words after the object.
    pub fn suffix(&self) -> &str {
        &self.suffix
    }

    /// Number of context words preceding the object.
    pub fn object_slot(&self) -> usize {
        self.prefix.split_whitespace().count()
    }

    pub fn has_context(&self) -> bool {
        !self.context_text.is_empty()
    }

    /// Object re-inserted into its context; equals the normalized caption.
    pub fn reconstruct(&self) -> String {
        collapse_whitespace(&format!("{} {} {}", self.prefix, self.object_text, self.suffix))
    }
}

/// Joins captions with their parses. Returns the splits in caption order and
/// the number of captions discarded for having no single semantic head.
pub fn apply_parses(
    captions: &[CaptionRecord],
    parses: &[ParseResult],
) -> Result<(Vec<SplitCaption>, usize)> {
    let mut by_id: HashMap<&str, &ParseResult> = HashMap::with_capacity(parses.len());
    for p in parses {
        if by_id.insert(&p.caption_id, p).is_some() {
            return Err(Error::Join(format!(
                "caption `{}` has more than one parse",
                p.caption_id
            )));
        }
    }
    let known: std::collections::HashSet<&str> =
        captions.iter().map(|c| c.caption_id.as_str()).collect();
    if let Some(orphan) = parses.iter().find(|p| !known.contains(p.caption_id.as_str())) {
        return Err(Error::Join(format!(
            "parse for unknown caption `{}`",
            orphan.caption_id
        )));
    }

    let mut splits = Vec::new();
    let mut discarded = 0;
    for caption in captions {
        let parse = by_id.get(caption.caption_id.as_str()).ok_or_else(|| {
            Error::Join(format!("caption `{}` has no parse", caption.caption_id))
        })?;
        match parse.status {
            ParseStatus::NoHead | ParseStatus::MultiHead => discarded += 1,
            ParseStatus::Ok => {
                let (Some(start), Some(end)) = (parse.object_start, parse.object_end) else {
                    return Err(Error::validation(
                        &caption.caption_id,
                        "ok parse without object span",
                    ));
                };
                let split = SplitCaption::new(caption.clone(), start, end)?;
                if let Some(head) = &parse.head_text {
                    if normalize(head) != split.object_text {
                        return Err(Error::validation(
                            &caption.caption_id,
                            format!(
                                "head `{head}` does not match span text `{}`",
                                split.object_text
                            ),
                        ));
                    }
                }
                splits.push(split);
            }
        }
    }
    Ok((splits, discarded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn caption(id: &str, text: &str) -> CaptionRecord {
        CaptionRecord {
            caption_id: id.into(),
            image_id: "img".into(),
            text: text.into(),
            gt_box: BBox::new(0.0, 0.0, 10.0, 10.0).unwrap(),
            category: "dog".into(),
        }
    }

    fn ok_parse(id: &str, start: usize, end: usize) -> ParseResult {
        ParseResult {
            caption_id: id.into(),
            status: ParseStatus::Ok,
            object_start: Some(start),
            object_end: Some(end),
            head_text: None,
        }
    }

    #[test]
    fn empty_corpus() {
        let f = write_tmp("");
        assert!(load_captions(f.path()).unwrap().is_empty());
    }

    #[test]
    fn one_caption() {
        let f = write_tmp(
            r#"{"caption_id":"c1","image_id":"i1","text":"Red car","bbox":[1,2,30,40],"category":"car"}"#,
        );
        let got = load_captions(f.path()).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].caption_id, "c1");
        assert_eq!(got[0].image_id, "i1");
        assert_eq!(got[0].text, "Red car");
        assert_eq!(got[0].gt_box, BBox::new(1.0, 2.0, 30.0, 40.0).unwrap());
        assert_eq!(got[0].category, "car");
    }

    #[test]
    fn inverted_box_names_caption() {
        let f = write_tmp(
            r#"{"caption_id":"bad-7","image_id":"i1","text":"x","bbox":[30,2,10,40],"category":"car"}"#,
        );
        match load_captions(f.path()) {
            Err(Error::Validation { id, .. }) => assert_eq!(id, "bad-7"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = write_tmp(
            "{\"caption_id\":\"a\",\"image_id\":\"i\",\"text\":\"x\",\"bbox\":[0,0,1,1],\"category\":\"c\"}\n{oops\n",
        );
        match load_captions(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn xywh_header_converts() {
        let f = write_tmp(
            "{\"bbox_format\":\"xywh\"}\n{\"caption_id\":\"a\",\"image_id\":\"i\",\"text\":\"x\",\"bbox\":[10,20,30,40],\"category\":\"c\"}\n",
        );
        let got = load_captions(f.path()).unwrap();
        assert_eq!(got[0].gt_box, BBox::new(10.0, 20.0, 40.0, 60.0).unwrap());
    }

    #[test]
    fn images_load_and_validate() {
        let f = write_tmp(concat!(
            r#"{"image_id":"a","width":100,"height":50,"categories":["dog"],"boxes":{"dog":[[0,0,10,10]]}}"#,
            "\n",
            r#"{"image_id":"b","width":100,"height":50,"categories":["cat","person"],"boxes":{}}"#,
            "\n"
        ));
        let got = load_image_annotations(f.path()).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got["a"].category_boxes["dog"].len(), 1);
        assert!(got["b"].categories.contains("person"));

        let out_of_bounds = write_tmp(
            r#"{"image_id":"a","width":100,"height":50,"categories":["dog"],"boxes":{"dog":[[0,0,10,60]]}}"#,
        );
        assert!(matches!(
            load_image_annotations(out_of_bounds.path()),
            Err(Error::Validation { .. })
        ));

        let dup = write_tmp(concat!(
            r#"{"image_id":"a","width":1,"height":1,"categories":[]}"#,
            "\n",
            r#"{"image_id":"a","width":1,"height":1,"categories":[]}"#
        ));
        assert!(matches!(
            load_image_annotations(dup.path()),
            Err(Error::DuplicateKey(id)) if id == "a"
        ));

        let unlisted = write_tmp(
            r#"{"image_id":"a","width":100,"height":50,"categories":["dog"],"boxes":{"cat":[[0,0,1,1]]}}"#,
        );
        assert!(load_image_annotations(unlisted.path()).is_err());
    }

    #[test]
    fn multi_word_head_split() {
        let c = caption("t", "teddy bear on the couch");
        let (splits, dropped) = apply_parses(&[c], &[ok_parse("t", 0, 10)]).unwrap();
        assert_eq!(dropped, 0);
        assert_eq!(splits[0].object_text, "teddy bear");
        assert_eq!(splits[0].context_text, "on the couch");
        assert_eq!(splits[0].reconstruct(), "teddy bear on the couch");
    }

    #[test]
    fn context_on_both_sides() {
        let c = caption("c", "Left  red car near the tree");
        let split = SplitCaption::new(c, 10, 13).unwrap();
        assert_eq!(split.object_text, "car");
        assert_eq!(split.context_text, "left red near the tree");
        assert_eq!(split.object_slot(), 2);
    }

    #[test]
    fn headless_captions_are_counted() {
        let caps = vec![caption("a", "dog"), caption("b", "running"), caption("c", "man and dog")];
        let parses = vec![
            ok_parse("a", 0, 3),
            ParseResult {
                caption_id: "b".into(),
                status: ParseStatus::NoHead,
                object_start: None,
                object_end: None,
                head_text: None,
            },
            ParseResult {
                caption_id: "c".into(),
                status: ParseStatus::MultiHead,
                object_start: None,
                object_end: None,
                head_text: None,
            },
        ];
        let (splits, dropped) = apply_parses(&caps, &parses).unwrap();
        assert_eq!(splits.len(), 1);
        assert_eq!(dropped, 2);
        assert!(!splits[0].has_context());
    }

    #[test]
    fn join_errors() {
        let caps = vec![caption("a", "dog")];
        assert!(matches!(apply_parses(&caps, &[]), Err(Error::Join(_))));
        let orphan = vec![ok_parse("a", 0, 3), ok_parse("zzz", 0, 1)];
        assert!(matches!(apply_parses(&caps, &orphan), Err(Error::Join(_))));
        let dup = vec![ok_parse("a", 0, 3), ok_parse("a", 0, 3)];
        assert!(matches!(apply_parses(&caps, &dup), Err(Error::Join(_))));
    }

    #[test]
    fn bad_span_and_head_mismatch() {
        let caps = vec![caption("a", "dog")];
        assert!(matches!(
            apply_parses(&caps, &[ok_parse("a", 0, 9)]),
            Err(Error::Span { .. })
        ));
        let mut p = ok_parse("a", 0, 3);
        p.head_text = Some("cat".into());
        assert!(apply_parses(&caps, &[p]).is_err());
    }

    #[test]
    fn reload_is_idempotent() {
        let f = write_tmp(concat!(
            r#"{"caption_id":"a","image_id":"i","text":"A  Dog","bbox":[0,0,1.5,1],"category":"Dog"}"#,
            "\n",
            r#"{"caption_id":"b","image_id":"i","text":"cat","bbox":[0,0,2,2],"category":"cat"}"#,
        ));
        let first = load_captions(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        jsonl::write(out.path(), &first).unwrap();
        let second = load_captions(out.path()).unwrap();
        assert_eq!(first, second);
    }
}
