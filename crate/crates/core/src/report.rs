//! Deterministic tables and SVG charts for the analysis outputs.
//!
//! Output directory layout:
//!
//! - `stats.csv`: filtering counts per strategy
//! - `edges.csv`: bin edges, one column per edge
//! - `per_bin_<strategy>.csv` / `.svg`: mean score per similarity bin
//! - `correlations.json`: per-strategy Pearson/Spearman coefficients
//! - `similarity_hist.csv` / `.svg`: random-pair similarity distribution

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{BinMean, CorrelationOutcome};
use crate::generator::{GenerationStats, Strategy};
use crate::geometry::BinEdges;
use crate::jsonl;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

/// Equal-width histogram with counters for samples outside the range.
/// Non-finite samples are counted as overflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<HistogramBin>,
    pub underflow: usize,
    pub overflow: usize,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.underflow + self.overflow + self.bins.iter().map(|b| b.count).sum::<usize>()
    }
}

/// Bins are `[low, high)`, except the last which also holds `hi`.
pub fn histogram(samples: &[f64], n_bins: usize, range: (f64, f64)) -> Histogram {
    let (lo, hi) = range;
    assert!(n_bins >= 1 && lo < hi, "histogram needs n_bins >= 1 and lo < hi");
    let edges: Vec<f64> = (0..=n_bins)
        .map(|i| if i == n_bins { hi } else { lo + (hi - lo) * i as f64 / n_bins as f64 })
        .collect();
    let mut counts = vec![0usize; n_bins];
    let (mut underflow, mut overflow) = (0, 0);
    for &x in samples {
        if x.is_nan() || x > hi {
            overflow += 1;
        } else if x < lo {
            underflow += 1;
        } else {
            // Estimate, then correct against the stored edges.
            let mut i = (((x - lo) / (hi - lo)) * n_bins as f64) as usize;
            i = i.min(n_bins - 1);
            while i > 0 && x < edges[i] {
                i -= 1;
            }
            while i + 1 < n_bins && x >= edges[i + 1] {
                i += 1;
            }
            counts[i] += 1;
        }
    }
    Histogram {
        bins: counts
            .into_iter()
            .enumerate()
            .map(|(i, count)| HistogramBin {
                low: edges[i],
                high: edges[i + 1],
                count,
            })
            .collect(),
        underflow,
        overflow,
    }
}

/// Everything the report renders; each part is optional.
#[derive(Debug, Clone, Default)]
pub struct ReportInputs {
    pub stats: Vec<(Strategy, GenerationStats)>,
    pub per_bin: Vec<(Strategy, Vec<BinMean>)>,
    pub correlations: Vec<(Strategy, CorrelationOutcome)>,
    pub similarity_samples: Option<Vec<f64>>,
    pub edges: Option<BinEdges>,
}

pub const SIMILARITY_HIST_BINS: usize = 40;

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let err = |e: csv::Error| Error::Format(format!("csv: {e}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

/// Filtering counts laid out with one column per strategy.
pub fn stats_csv(stats: &[(Strategy, GenerationStats)]) -> Result<Vec<u8>> {
    let mut header = vec!["row".to_string()];
    header.extend(stats.iter().map(|(s, _)| s.to_string()));
    let row = |name: &str, f: &dyn Fn(&GenerationStats) -> usize| {
        let mut r = vec![name.to_string()];
        r.extend(stats.iter().map(|(_, st)| f(st).to_string()));
        r
    };
    let rows = vec![
        row("no_head", &|s| s.discarded_no_head),
        row("no_replacement", &|s| s.discarded_no_replacement),
        row("retained", &|s| s.retained_captions),
        row("samples", &|s| s.samples),
    ];
    csv_bytes(&header, &rows)
}

pub fn edges_csv(edges: &BinEdges) -> Result<Vec<u8>> {
    let header: Vec<String> = (1..=edges.edges().len()).map(|i| i.to_string()).collect();
    csv_bytes(&header, &[edges.edges().iter().map(|e| e.to_string()).collect()])
}

pub fn histogram_csv(hist: &Histogram) -> Result<Vec<u8>> {
    let header = ["low", "high", "count"].map(String::from).to_vec();
    let mut rows = vec![vec!["-inf".into(), hist.bins[0].low.to_string(), hist.underflow.to_string()]];
    rows.extend(
        hist.bins
            .iter()
            .map(|b| vec![b.low.to_string(), b.high.to_string(), b.count.to_string()]),
    );
    rows.push(vec![
        hist.bins[hist.bins.len() - 1].high.to_string(),
        "inf".into(),
        hist.overflow.to_string(),
    ]);
    csv_bytes(&header, &rows)
}

const SVG_W: f64 = 480.0;
const SVG_H: f64 = 320.0;
const MARGIN: f64 = 40.0;

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{SVG_W}" height="{SVG_H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        SVG_W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{y}" x2="{x2}" y2="{y}" stroke="black"/>"#,
        y = SVG_H - MARGIN,
        x2 = SVG_W - MARGIN / 2.0
    );
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Bar chart of mean score per bin on a fixed [0, 1] axis. Empty bins get
/// no bar.
pub fn per_bin_svg(title: &str, per_bin: &[BinMean]) -> String {
    let mut s = svg_open(title);
    let plot_h = SVG_H - 2.0 * MARGIN;
    let slot = (SVG_W - 1.5 * MARGIN) / per_bin.len().max(1) as f64;
    for (i, b) in per_bin.iter().enumerate() {
        let x = MARGIN + slot * i as f64;
        if let Some(mean) = b.mean {
            let h = plot_h * mean.clamp(0.0, 1.0);
            let _ = writeln!(
                s,
                r#"<rect class="bar" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="steelblue"><title>bin {}: mean {:.4} (n={})</title></rect>"#,
                x + slot * 0.1,
                SVG_H - MARGIN - h,
                slot * 0.8,
                h,
                b.bin,
                mean,
                b.count
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#,
            x + slot / 2.0,
            SVG_H - MARGIN + 15.0,
            b.bin
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Histogram bars scaled to the largest in-range count.
pub fn histogram_svg(title: &str, hist: &Histogram) -> String {
    let mut s = svg_open(title);
    let plot_h = SVG_H - 2.0 * MARGIN;
    let max = hist.bins.iter().map(|b| b.count).max().unwrap_or(0).max(1) as f64;
    let slot = (SVG_W - 1.5 * MARGIN) / hist.bins.len() as f64;
    for (i, b) in hist.bins.iter().enumerate() {
        let h = plot_h * b.count as f64 / max;
        let _ = writeln!(
            s,
            r#"<rect class="bar" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="gray"><title>[{:.3}, {:.3}): {}</title></rect>"#,
            MARGIN + slot * i as f64,
            SVG_H - MARGIN - h,
            slot,
            h,
            b.low,
            b.high,
            b.count
        );
    }
    let first = hist.bins[0].low;
    let last = hist.bins[hist.bins.len() - 1].high;
    for (x, label) in [(MARGIN, first), (SVG_W - MARGIN / 2.0, last)] {
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="11">{label:.2}</text>"#,
            SVG_H - MARGIN + 15.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes every artifact the inputs allow and returns the written paths in
/// write order.
pub fn render_tables(inputs: &ReportInputs, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, bytes: &[u8]| -> Result<()> {
        let path = out_dir.join(name);
        jsonl::write_bytes(&path, bytes)?;
        written.push(path);
        Ok(())
    };

    if !inputs.stats.is_empty() {
        put("stats.csv".into(), &stats_csv(&inputs.stats)?)?;
    }
    if let Some(edges) = &inputs.edges {
        put("edges.csv".into(), &edges_csv(edges)?)?;
    }
    for (strategy, per_bin) in &inputs.per_bin {
        put(format!("per_bin_{strategy}.csv"), &crate::evaluation::per_bin_csv(per_bin)?)?;
        let title = format!("Mean score per similarity bin ({strategy})");
        put(format!("per_bin_{strategy}.svg"), per_bin_svg(&title, per_bin).as_bytes())?;
    }
    if !inputs.correlations.is_empty() {
        let table: BTreeMap<String, &CorrelationOutcome> = inputs
            .correlations
            .iter()
            .map(|(s, c)| (s.to_string(), c))
            .collect();
        let mut bytes = serde_json::to_vec_pretty(&table).map_err(|e| Error::Format(e.to_string()))?;
        bytes.push(b'\n');
        put("correlations.json".into(), &bytes)?;
    }
    if let Some(samples) = &inputs.similarity_samples {
        let hist = histogram(samples, SIMILARITY_HIST_BINS, (-1.0, 1.0));
        put("similarity_hist.csv".into(), &histogram_csv(&hist)?)?;
        put(
            "similarity_hist.svg".into(),
            histogram_svg("Cosine similarity of random caption pairs", &hist).as_bytes(),
        )?;
    }
    Ok(written)
}
