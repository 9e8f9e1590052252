use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cfground::corpus::{apply_parses, load_captions, load_image_annotations, load_parses};
use cfground::evaluation::{evaluate as score, load_predictions, read_correlations, read_per_bin_csv, write_evaluation, DEFAULT_THRESHOLD};
use cfground::generator::{generate_dataset, meta_path, read_manifest, write_manifest, GenerateOptions, Selection, Strategy};
use cfground::geometry::{anisotropy as pair_distribution, bin_edges, BinEdges, SimilarityDistribution};
use cfground::jsonl;
use cfground::provider::{read_cache, write_cache, CachingProvider, EmbeddingProvider, ProviderSpec};
use cfground::report::{render_tables, ReportInputs};
use cfground::vocab::{build_context_vocab, build_object_vocab, load_synonyms};
use serde::{Deserialize, Serialize};

use crate::config::{Config, Section};
use crate::summary::{beside, inside, RunSummary};
use crate::{AnisotropyArgs, CacheAction, EdgesArgs, EvaluateArgs, GenerateArgs, ProviderArgs, ReportArgs};

pub const DEFAULT_PAIRS: usize = 50_000;
pub const DEFAULT_K: usize = 5;
pub const SIDECAR_ENV: &str = "CFGROUND_SIDECAR";
pub const DEFAULT_SIDECAR: &str = "python3 -m cfground_sidecar serve --transport stdio";

pub const CONFIG_KEYS: &[(&str, &[&str])] = &[
    ("anisotropy", &["corpus", "provider", "cache", "sidecar", "pairs", "seed", "out"]),
    ("edges", &["dist", "k", "out"]),
    (
        "generate",
        &[
            "strategy", "k", "seed", "edges", "corpus", "images", "parses", "vocab", "provider", "cache", "sidecar",
            "selection", "jobs", "dump_vocab", "out",
        ],
    ),
    ("evaluate", &["manifest", "predictions", "images", "corpus", "threshold", "out"]),
    ("report", &["manifests", "results", "dist", "edges", "out"]),
    ("cache", &["corpus", "vocab", "provider", "cache", "sidecar", "out"]),
];

/// Contents of the `anisotropy` output file.
#[derive(Debug, Serialize, Deserialize)]
pub struct DistributionFile {
    pub score: f64,
    pub provider: String,
    pub captions: usize,
    #[serde(flatten)]
    pub distribution: SimilarityDistribution,
}

type Cached = CachingProvider<Box<dyn EmbeddingProvider>>;

struct Embedder {
    provider: Cached,
    cache_path: Option<PathBuf>,
}

impl Embedder {
    fn open(sec: &mut Section, args: ProviderArgs) -> Result<Self> {
        let spec_text: String = sec.require("provider", args.provider)?;
        let spec: ProviderSpec = spec_text.parse()?;
        let from_env = std::env::var(SIDECAR_ENV).ok().filter(|c| !c.trim().is_empty());
        let sidecar = sec.or("sidecar", from_env, DEFAULT_SIDECAR.to_string())?;
        if spec != ProviderSpec::Remote("stdio".into()) {
            sec.forget("sidecar");
        }
        let inner = spec
            .open(&sidecar)
            .with_context(|| format!("cannot open provider `{spec_text}`"))?;
        let cache_path = sec.path("cache", args.cache)?;
        let provider = match &cache_path {
            Some(p) if p.exists() => {
                let cache = read_cache(p)?;
                log::info!("loaded {} cached embeddings from {}", cache.len(), p.display());
                CachingProvider::with_cache(inner, cache)?
            }
            _ => CachingProvider::new(inner),
        };
        Ok(Self { provider, cache_path })
    }

    fn save(&self, summary: &mut RunSummary) -> Result<()> {
        if let Some(path) = &self.cache_path {
            let cache = self.provider.snapshot();
            if !cache.is_empty() {
                write_cache(&cache, path)?;
                summary.count("cache_entries", cache.len());
            }
        }
        Ok(())
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(())
}

pub fn anisotropy(config: &Config, args: AnisotropyArgs) -> Result<()> {
    let mut sec = config.section("anisotropy");
    let corpus = sec.require_path("corpus", args.corpus)?;
    let pairs = sec.or("pairs", args.pairs, DEFAULT_PAIRS)?;
    let seed = sec.or("seed", args.seed, 0u64)?;
    let out = sec.require_path("out", args.out)?;
    let embedder = Embedder::open(&mut sec, args.provider)?;
    let mut summary = RunSummary::new("anisotropy", sec.into_resolved());
    summary.input("corpus", &corpus)?;

    let captions = summary.phase("load", || Ok(load_captions(&corpus)?))?;
    let texts: Vec<String> = captions.iter().map(|c| c.normalized_text()).collect();
    let embeddings = summary.phase("embed", || Ok(embedder.provider.embed_batch(&texts)?))?;
    let (score, distribution) = summary.phase("pairs", || Ok(pair_distribution(&embeddings, pairs, seed)?))?;
    log::info!("mean pairwise cosine {score:.4} over {pairs} pairs of {} captions", captions.len());

    let file = DistributionFile {
        score,
        provider: embedder.provider.identity(),
        captions: captions.len(),
        distribution,
    };
    ensure_parent(&out)?;
    jsonl::write_json(&out, &file)?;
    embedder.save(&mut summary)?;
    summary.output(&out);
    summary.count("captions", captions.len());
    summary.count("pairs", pairs);
    summary.count("score", score);
    summary.write(&beside(&out))
}

fn read_distribution(path: &Path) -> Result<DistributionFile> {
    let file: DistributionFile = jsonl::read_json(path)?;
    file.distribution
        .validate()
        .with_context(|| format!("invalid distribution in {}", path.display()))?;
    Ok(file)
}

pub fn edges(config: &Config, args: EdgesArgs) -> Result<()> {
    let mut sec = config.section("edges");
    let dist = sec.require_path("dist", args.dist)?;
    let k = sec.or("k", args.k, DEFAULT_K)?;
    let out = sec.require_path("out", args.out)?;
    let mut summary = RunSummary::new("edges", sec.into_resolved());
    summary.input("dist", &dist)?;

    let file = summary.phase("load", || read_distribution(&dist))?;
    let edges = bin_edges(&file.distribution, k)
        .with_context(|| format!("cannot derive {k} bins from {}", dist.display()))?;
    ensure_parent(&out)?;
    jsonl::write_json(&out, &edges)?;
    summary.output(&out);
    summary.count("samples", file.distribution.samples.len());
    summary.count("edges", edges.edges());
    summary.write(&beside(&out))
}

fn read_edges(path: &Path) -> Result<BinEdges> {
    jsonl::read_json(path).with_context(|| format!("invalid bin edges in {}", path.display()))
}

pub fn generate(config: &Config, args: GenerateArgs) -> Result<()> {
    let mut sec = config.section("generate");
    let strategy: Strategy = sec.require::<String>("strategy", args.strategy)?.parse()?;
    let k = sec.or("k", args.k, DEFAULT_K)?;
    let seed = sec.or("seed", args.seed, 0u64)?;
    let edges_path = sec.require_path("edges", args.edges)?;
    let corpus = sec.require_path("corpus", args.corpus)?;
    let images = sec.require_path("images", args.images)?;
    let parses = sec.require_path("parses", args.parses)?;
    let vocab = sec.require_path("vocab", args.vocab)?;
    let selection: Selection = sec.or("selection", args.selection, "uniform".to_string())?.parse()?;
    let jobs = sec.or("jobs", args.jobs, 0usize)?;
    let dump_vocab = sec.path("dump_vocab", args.dump_vocab)?;
    let out = sec.require_path("out", args.out)?;
    let embedder = Embedder::open(&mut sec, args.provider)?;
    let mut params = sec.into_resolved();
    // Thread count never changes the output, so it stays out of the hash.
    params.remove("jobs");
    let mut summary = RunSummary::new("generate", params);
    for (name, path) in [("edges", &edges_path), ("corpus", &corpus), ("images", &images), ("parses", &parses), ("vocab", &vocab)] {
        summary.input(name, path)?;
    }

    let (edges, captions, annotations, parse_results, synonyms) = summary.phase("load", || {
        Ok((
            read_edges(&edges_path)?,
            load_captions(&corpus)?,
            load_image_annotations(&images)?,
            load_parses(&parses)?,
            load_synonyms(&vocab)?,
        ))
    })?;
    if edges.k() != k {
        bail!("{} holds {} bins but k = {k}", edges_path.display(), edges.k());
    }
    let (splits, no_head) = apply_parses(&captions, &parse_results)?;
    let categories: Vec<String> = synonyms.keys().cloned().collect();
    let objects = build_object_vocab(&categories, &synonyms)?;
    let contexts = build_context_vocab(&splits);
    if let Some(dir) = &dump_vocab {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        objects.write_jsonl(&dir.join("objects.jsonl"))?;
        contexts.write_jsonl(&dir.join("contexts.jsonl"))?;
    }

    let opts = GenerateOptions {
        selection,
        jobs,
        discarded_no_head: no_head,
        ..GenerateOptions::new(strategy, seed)
    };
    let manifest = summary.phase("generate", || {
        Ok(generate_dataset(&splits, &annotations, &objects, &contexts, &edges, &embedder.provider, &opts)?)
    })?;
    manifest.verify()?;
    ensure_parent(&out)?;
    write_manifest(&manifest, &out)?;
    embedder.save(&mut summary)?;
    summary.output(&out);
    summary.output(&meta_path(&out));
    summary.count("stats", manifest.stats());
    summary.count("object_vocabulary", objects.len());
    summary.count("context_vocabulary", contexts.len());
    summary.write(&beside(&out))
}

pub fn evaluate(config: &Config, args: EvaluateArgs) -> Result<()> {
    let mut sec = config.section("evaluate");
    let manifest_path = sec.require_path("manifest", args.manifest)?;
    let predictions = sec.require_path("predictions", args.predictions)?;
    let images = sec.require_path("images", args.images)?;
    let corpus = sec.require_path("corpus", args.corpus)?;
    let threshold = sec.or("threshold", args.threshold, DEFAULT_THRESHOLD)?;
    let out = sec.require_path("out", args.out)?;
    if !(0.0..=1.0).contains(&threshold) {
        bail!("--threshold must lie in [0, 1], got {threshold}");
    }
    let mut summary = RunSummary::new("evaluate", sec.into_resolved());
    summary.input("manifest", &manifest_path)?;
    summary.input("manifest_meta", &meta_path(&manifest_path))?;
    summary.input("predictions", &predictions)?;
    summary.input("images", &images)?;
    summary.input("corpus", &corpus)?;

    let (manifest, preds, annotations, captions) = summary.phase("load", || {
        Ok((
            read_manifest(&manifest_path)?,
            load_predictions(&predictions)?,
            load_image_annotations(&images)?,
            load_captions(&corpus)?,
        ))
    })?;
    let captions: BTreeMap<_, _> = captions.into_iter().map(|c| (c.caption_id.clone(), c)).collect();
    let eval = summary.phase("score", || Ok(score(&manifest, &preds, &captions, &annotations, threshold)?))?;
    write_evaluation(&eval, &out)?;
    for name in ["rows.csv", "per_bin.csv", "correlations.json"] {
        summary.output(&out.join(name));
    }
    summary.count("rows", eval.rows.len());
    summary.count("retained_captions", eval.retained_captions);
    summary.count("excluded_captions", eval.excluded_captions);
    summary.count("correlation", &eval.correlation);
    summary.write(&inside(&out))
}

pub fn report(config: &Config, args: ReportArgs) -> Result<()> {
    let mut sec = config.section("report");
    let manifests = sec.paths("manifests", args.manifests)?;
    let results = sec.paths("results", args.results)?;
    let dist = sec.path("dist", args.dist)?;
    let edges_path = sec.path("edges", args.edges)?;
    let out = sec.require_path("out", args.out)?;
    if manifests.is_empty() && results.is_empty() && dist.is_none() && edges_path.is_none() {
        bail!("nothing to report: pass --manifest, --results, --dist or --edges");
    }
    let mut summary = RunSummary::new("report", sec.into_resolved());

    let mut inputs = ReportInputs::default();
    for (i, path) in manifests.iter().enumerate() {
        summary.input(&format!("manifest_meta_{i}"), &meta_path(path))?;
        let m = read_manifest(path)?;
        if inputs.edges.is_none() {
            inputs.edges = Some(m.config().edges.clone());
        }
        inputs.stats.push((m.config().strategy, m.stats().clone()));
    }
    for (i, dir) in results.iter().enumerate() {
        let corr_path = dir.join("correlations.json");
        let per_bin_path = dir.join("per_bin.csv");
        summary.input(&format!("correlations_{i}"), &corr_path)?;
        summary.input(&format!("per_bin_{i}"), &per_bin_path)?;
        let stored = read_correlations(&corr_path)?;
        inputs.per_bin.push((stored.strategy, read_per_bin_csv(&per_bin_path)?));
        inputs.correlations.push((stored.strategy, stored.similarity));
    }
    if let Some(path) = &dist {
        summary.input("dist", path)?;
        inputs.similarity_samples = Some(read_distribution(path)?.distribution.samples);
    }
    if let Some(path) = &edges_path {
        summary.input("edges", path)?;
        inputs.edges = Some(read_edges(path)?);
    }
    let written = summary.phase("render", || Ok(render_tables(&inputs, &out)?))?;
    for p in &written {
        summary.output(p);
    }
    summary.count("files", written.len());
    summary.write(&inside(&out))
}

pub fn cache(config: &Config, action: CacheAction) -> Result<()> {
    match action {
        CacheAction::Inspect { path } => {
            let cache = read_cache(&path)?;
            let info = serde_json::json!({
                "path": path.display().to_string(),
                "dimension": cache.dimension(),
                "entries": cache.len(),
                "bytes": cache.encoded_len(),
            });
            println!("{}", serde_json::to_string_pretty(&info)?);
            Ok(())
        }
        CacheAction::Build { corpus, vocab, provider, out } => {
            let mut sec = config.section("cache");
            let corpus = sec.require_path("corpus", corpus)?;
            let vocab = sec.path("vocab", vocab)?;
            let out = sec.require_path("out", out)?;
            let args = ProviderArgs {
                provider: provider.provider,
                cache: Some(provider.cache.unwrap_or_else(|| out.clone())),
            };
            let embedder = Embedder::open(&mut sec, args)?;
            let mut summary = RunSummary::new("cache", sec.into_resolved());
            summary.input("corpus", &corpus)?;
            let mut texts: Vec<String> = load_captions(&corpus)?.iter().map(|c| c.normalized_text()).collect();
            if let Some(v) = &vocab {
                summary.input("vocab", v)?;
                let synonyms = load_synonyms(v)?;
                let categories: Vec<String> = synonyms.keys().cloned().collect();
                texts.extend(build_object_vocab(&categories, &synonyms)?.entries().iter().map(|e| e.term.clone()));
            }
            summary.phase("embed", || Ok(embedder.provider.embed_batch(&texts)?))?;
            let cache = embedder.provider.snapshot();
            ensure_parent(&out)?;
            write_cache(&cache, &out)?;
            summary.output(&out);
            summary.count("texts", texts.len());
            summary.count("entries", cache.len());
            summary.write(&beside(&out))
        }
    }
}
