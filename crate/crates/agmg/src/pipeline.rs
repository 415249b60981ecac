//! Stage runner. Each stage reads artifacts from the work directory and writes
//! its own; `manifest.json` records input and output hashes so that a rerun
//! skips stages whose inputs did not change.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use agmg_core::align::{align, pairs_from_blocks, prealigned_blocks, AlignConfig};
use agmg_core::curate::{deduplicate, make_splits, DroppedPair, SplitManifest, SplitSpec};
use agmg_core::embed::{build_overlaps, embed_batch, overlap_windows, EmbeddingProvider};
use agmg_core::model::{Document, Metadata, SentencePair, Side, Split};
use agmg_core::normalize::{clean_text, CleanOptions, CleaningReport};
use agmg_core::refine::{plan_rows, refine_batch, RefineConfig, RefineResult, RefineTransport};
use agmg_core::segment::{segment_texts, SegmenterConfig};
use agmg_core::stats::{compute_stats, render_data_card, DataCard};
use agmg_core::vocab::{discover_missing, extend_vocab, MissingReport, TransplantPlan, Vocabulary};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{has_errors, validate, Diagnostic, PipelineConfig, ProviderSpec, Severity, Stage, VocabFormat};
use crate::io::{
    read_bytes, read_documents, read_json, read_jsonl, read_pairs, read_text, write_atomic,
    write_json, write_jsonl, write_pairs, FileError, LineError,
};
use crate::transport::sha256_hex;
use crate::vectors::{sidecar_path, VectorFile, VectorStore};

pub const MANIFEST: &str = "manifest.json";

pub const CLEAN_DOCS: &str = "clean/documents.jsonl";
pub const CLEAN_REPORT: &str = "clean/report.json";
pub const SEGMENT_DOCS: &str = "segment/documents.jsonl";
pub const VECTORS: &str = "embed/vectors.bin";
pub const VECTOR_TEXTS: &str = "embed/vectors.bin.txt";
pub const ALIGN_PAIRS: &str = "align/pairs.jsonl";
pub const REFINE_PAIRS: &str = "refine/pairs.jsonl";
pub const REFINE_REVIEW: &str = "refine/review.jsonl";
pub const REFINE_SUMMARY: &str = "refine/summary.json";
pub const SPLIT_MANIFEST: &str = "curate/manifest.json";
pub const DROPPED: &str = "curate/dropped.jsonl";
pub const MISSING: &str = "vocab/missing.json";
pub const PLAN: &str = "vocab/plan.jsonl";
pub const VOCAB: &str = "vocab/vocab.txt";
pub const CARD_TEXT: &str = "stats/card.txt";
pub const CARD_JSON: &str = "stats/card.json";

pub fn split_file(split: Split) -> String {
    format!("curate/{}.jsonl", split.as_str())
}

/// A document after segmentation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentedDocument {
    pub id: String,
    pub meta: Metadata,
    #[serde(default)]
    pub prealigned: bool,
    pub grc: Vec<String>,
    pub ell: Vec<String>,
}

/// Side-by-side cleaning counts plus what was dropped.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CleanSummary {
    pub documents_in: usize,
    pub documents_out: usize,
    pub malformed: Vec<LineError>,
    /// Documents with a side that was empty after cleaning.
    pub emptied: Vec<String>,
    pub grc: CleaningReport,
    pub ell: CleaningReport,
}

pub fn clean_documents(docs: Vec<Document>, opts: &CleanOptions) -> (Vec<Document>, CleanSummary) {
    let mut summary = CleanSummary { documents_in: docs.len(), ..CleanSummary::default() };
    let mut out = Vec::with_capacity(docs.len());
    for doc in docs {
        let (grc, rg) = clean_text(&doc.grc_text, Side::Grc, opts);
        let (ell, re) = clean_text(&doc.ell_text, Side::Ell, opts);
        summary.grc.merge(&rg);
        summary.ell.merge(&re);
        if grc.is_empty() || ell.is_empty() {
            summary.emptied.push(doc.id);
            continue;
        }
        out.push(Document { grc_text: grc, ell_text: ell, ..doc });
    }
    summary.documents_out = out.len();
    (out, summary)
}

/// Splits both sides into sentences; documents with an empty side are dropped.
pub fn segment_documents(docs: &[Document], cfg: &SegmenterConfig) -> Vec<SegmentedDocument> {
    docs.iter()
        .map(|d| SegmentedDocument {
            id: d.id.clone(),
            meta: d.meta.clone(),
            prealigned: d.prealigned,
            grc: segment_texts(&d.grc_text, Side::Grc, cfg),
            ell: segment_texts(&d.ell_text, Side::Ell, cfg),
        })
        .filter(|d| !d.grc.is_empty() && !d.ell.is_empty())
        .collect()
}

/// Applies `f` to every item on up to `workers` threads. Results keep input order.
pub fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(i, &items[i]);
                slots.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("no worker panicked").into_iter().map(|r| r.expect("every slot filled")).collect()
}

fn first_error<R>(results: Vec<Result<R, String>>) -> Result<Vec<R>, String> {
    results.into_iter().collect()
}

/// Embeds every overlap window of the documents that need alignment. The
/// store holds each distinct window text once, in first-seen order.
pub fn embed_documents(
    docs: &[SegmentedDocument],
    max_window: usize,
    provider: &(dyn EmbeddingProvider + Sync),
    workers: usize,
) -> Result<VectorStore, String> {
    let todo: Vec<&SegmentedDocument> = docs.iter().filter(|d| !d.prealigned).collect();
    let per_doc = parallel_map(&todo, workers, |_, d| {
        let texts: Vec<String> = overlap_windows(&d.grc, max_window)
            .into_iter()
            .chain(overlap_windows(&d.ell, max_window))
            .map(|(_, _, t)| t)
            .collect();
        let vectors = embed_batch(&texts, provider).map_err(|e| format!("document {}: {e}", d.id))?;
        Ok((texts, vectors))
    });
    let mut seen = HashSet::new();
    let mut texts = Vec::new();
    let mut vectors = Vec::new();
    for (ts, vs) in first_error(per_doc)? {
        for (t, v) in ts.into_iter().zip(vs) {
            if seen.insert(t.clone()) {
                texts.push(t);
                vectors.push(v);
            }
        }
    }
    VectorStore::new(texts, VectorFile { dimension: provider.dimension(), vectors })
}

/// Aligns each document; prealigned ones keep their sentence order.
pub fn align_documents(
    docs: &[SegmentedDocument],
    provider: &(dyn EmbeddingProvider + Sync),
    cfg: &AlignConfig,
    workers: usize,
) -> Result<Vec<SentencePair>, String> {
    let per_doc = parallel_map(docs, workers, |_, d| {
        let blocks = if d.prealigned {
            prealigned_blocks(d.grc.len(), d.ell.len())
        } else {
            let src = build_overlaps(&d.grc, cfg.max_window, provider).map_err(|e| format!("document {}: {e}", d.id))?;
            let tgt = build_overlaps(&d.ell, cfg.max_window, provider).map_err(|e| format!("document {}: {e}", d.id))?;
            align(&src, &tgt, cfg).map_err(|e| format!("document {}: {e}", d.id))?
        };
        Ok(pairs_from_blocks(&d.id, &d.meta, &d.grc, &d.ell, &blocks))
    });
    Ok(first_error(per_doc)?.into_iter().flatten().collect())
}

/// Refines in batches of rows, sending up to `workers` batches at once.
pub fn refine_parallel(
    pairs: &[SentencePair],
    cfg: &RefineConfig,
    transport: &(dyn RefineTransport + Sync),
    workers: usize,
) -> Result<RefineResult, String> {
    let plans = plan_rows(pairs, cfg.row_size);
    let batches: Vec<_> = plans.chunks(cfg.batch_size.max(1)).collect();
    let results = parallel_map(&batches, workers, |i, batch| {
        refine_batch(batch, pairs, cfg, transport).map_err(|e| format!("batch {i} ({}): {e}", batch[0].row.id))
    });
    let mut out = RefineResult::default();
    for r in first_error(results)? {
        out.extend(r);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineSummary {
    pub pairs_in: usize,
    pub pairs_out: usize,
    pub calls: usize,
    pub accepted_edits: usize,
    pub rejected_edits: usize,
    pub review_rows: usize,
}

/// What the curate stage writes next to the split files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurateManifest {
    #[serde(flatten)]
    pub counts: SplitManifest,
    pub spec: SplitSpec,
    pub dropped_duplicates: usize,
    /// Split file names, relative to this manifest.
    pub files: BTreeMap<Split, String>,
}

/// Pairs of every split file listed in a curate manifest, in split order,
/// with the split of each pair id.
pub fn load_split_assignment(manifest: &Path) -> Result<(Vec<SentencePair>, BTreeMap<String, Split>), FileError> {
    let m: CurateManifest = read_json(manifest)?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let mut pairs = Vec::new();
    let mut assignment = BTreeMap::new();
    for split in Split::ALL {
        let Some(name) = m.files.get(&split) else { continue };
        let path = dir.join(name);
        for p in read_pairs(&path)? {
            if assignment.insert(p.id.clone(), split).is_some() {
                return Err(FileError::format(&path, format!("pair {:?} appears in two split files", p.id)));
            }
            pairs.push(p);
        }
    }
    Ok((pairs, assignment))
}

#[derive(Clone, Debug, PartialEq)]
pub struct VocabOutcome {
    pub missing: MissingReport,
    pub vocab: Vocabulary,
    pub plan: TransplantPlan,
}

/// Extends `base` with the characters of `corpus` it lacks. Fails if the
/// extended vocabulary still misses anything the plan did not list.
pub fn adapt_vocab<'a>(base: &Vocabulary, corpus: impl IntoIterator<Item = &'a str> + Clone) -> Result<VocabOutcome, String> {
    let missing = discover_missing(corpus.clone(), base);
    let (vocab, plan) = extend_vocab(base, &missing.chars);
    let left: Vec<String> = discover_missing(corpus, &vocab).chars.iter().map(|c| c.to_string()).collect();
    if left != plan.unresolved {
        return Err(format!("extended vocabulary still misses {left:?}, plan lists {:?}", plan.unresolved));
    }
    Ok(VocabOutcome { missing, vocab, plan })
}

pub fn load_vocabulary(path: &Path, format: VocabFormat) -> Result<Vocabulary, FileError> {
    let text = read_text(path)?;
    match format {
        VocabFormat::Pieces => Vocabulary::from_piece_list(&text),
        VocabFormat::Json => Vocabulary::from_json_map(&text),
    }
    .map_err(|e| FileError::format(path, e.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub stage: Stage,
    pub status: StageStatus,
    pub input_hash: String,
    /// Content hash of every input, keyed by work-relative path or `input:<name>`.
    pub inputs: BTreeMap<String, String>,
    pub params: Value,
    /// Hash over `outputs`; empty when the stage failed.
    pub output_hash: String,
    pub outputs: BTreeMap<String, String>,
    pub wall_time_ms: u64,
    /// Seconds since the Unix epoch.
    pub finished_at: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self, FileError> {
        read_json(path)
    }

    pub fn get(&self, stage: Stage) -> Option<&ManifestEntry> {
        self.stages.iter().find(|e| e.stage == stage)
    }

    /// The manifest with timing fields zeroed, for comparing runs.
    pub fn without_timestamps(&self) -> Manifest {
        let mut m = self.clone();
        for e in &mut m.stages {
            e.wall_time_ms = 0;
            e.finished_at = 0;
        }
        m
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration:\n{}", join_lines(.0))]
    Config(Vec<Diagnostic>),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: Stage, message: String },
    #[error(transparent)]
    Manifest(FileError),
}

fn join_lines(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

impl RunError {
    /// Process exit status: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Rerun every stage even if its inputs are unchanged.
    pub force: bool,
}

#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub executed: Vec<Stage>,
    pub skipped: Vec<Stage>,
    pub warnings: Vec<Diagnostic>,
    pub manifest: Manifest,
}

enum Input {
    Work(&'static str),
    Work2(String),
    External(&'static str, PathBuf),
}

pub struct Pipeline<'a> {
    cfg: &'a PipelineConfig,
    workdir: PathBuf,
    transport: Option<&'a (dyn RefineTransport + Sync)>,
}

type StageResult = Result<Vec<String>, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl<'a> Pipeline<'a> {
    pub fn new(cfg: &'a PipelineConfig) -> Self {
        Pipeline { cfg, workdir: cfg.workdir_path(), transport: None }
    }

    /// Uses `transport` for refinement instead of the configured one.
    pub fn with_transport(mut self, transport: &'a (dyn RefineTransport + Sync)) -> Self {
        self.transport = Some(transport);
        self
    }

    pub fn with_workdir(mut self, workdir: PathBuf) -> Self {
        self.workdir = workdir;
        self
    }

    pub fn workdir(&self) -> &Path {
        &self.workdir
    }

    fn work(&self, rel: &str) -> PathBuf {
        self.workdir.join(rel)
    }

    /// Where the curate, refine input and stats stages read pairs from.
    fn pair_source(&self) -> &'static str {
        if self.cfg.enabled(Stage::Refine) {
            REFINE_PAIRS
        } else {
            ALIGN_PAIRS
        }
    }

    fn doc_source(&self) -> Input {
        if self.cfg.enabled(Stage::Clean) {
            Input::Work(CLEAN_DOCS)
        } else {
            Input::External("documents", self.cfg.resolve(&self.cfg.input_docs))
        }
    }

    fn inputs(&self, stage: Stage) -> Vec<Input> {
        let cfg = self.cfg;
        match stage {
            Stage::Clean => vec![Input::External("documents", cfg.resolve(&cfg.input_docs))],
            Stage::Segment => {
                let mut v = vec![self.doc_source()];
                if let Some(f) = &cfg.segment.abbreviations_file {
                    v.push(Input::External("abbreviations", cfg.resolve(f)));
                }
                v
            }
            Stage::Embed => {
                let mut v = vec![Input::Work(SEGMENT_DOCS)];
                if let ProviderSpec::File(p) = &cfg.embed.provider {
                    let p = cfg.resolve(p);
                    v.push(Input::External("vectors.txt", sidecar_path(&p)));
                    v.push(Input::External("vectors", p));
                }
                v
            }
            Stage::Align => vec![Input::Work(SEGMENT_DOCS), Input::Work(VECTORS), Input::Work(VECTOR_TEXTS)],
            Stage::Refine => {
                let mut v = vec![Input::Work(ALIGN_PAIRS)];
                if let (None, Some(crate::transport::TransportSpec::Replay(p))) = (self.transport, &cfg.refine.transport) {
                    v.push(Input::External("replay", cfg.resolve(p)));
                }
                v
            }
            Stage::Curate => vec![Input::Work(self.pair_source())],
            Stage::Vocab => {
                let mut v = vec![Input::Work2(split_file(Split::Train))];
                if let Some(p) = &cfg.vocab.base_vocab {
                    v.push(Input::External("base_vocab", cfg.resolve(p)));
                }
                v
            }
            Stage::Stats => {
                if cfg.enabled(Stage::Curate) {
                    let mut v = vec![Input::Work(SPLIT_MANIFEST)];
                    v.extend(Split::ALL.into_iter().map(|s| Input::Work2(split_file(s))));
                    v
                } else {
                    vec![Input::Work(self.pair_source())]
                }
            }
        }
    }

    fn params(&self, stage: Stage) -> Result<Value, String> {
        let cfg = self.cfg;
        Ok(match stage {
            Stage::Clean => json!({ "clean": cfg.clean }),
            Stage::Segment => json!({ "segmenter": cfg.segmenter().map_err(err)? }),
            Stage::Embed => match &cfg.embed.provider {
                ProviderSpec::Builtin => {
                    json!({ "provider": "builtin", "builtin": cfg.embed.builtin, "max_window": cfg.align.max_window })
                }
                p => json!({ "provider": p.to_string(), "max_window": cfg.align.max_window }),
            },
            Stage::Align => json!({ "align": cfg.align }),
            Stage::Refine => {
                let transport = match (self.transport, &cfg.refine.transport) {
                    (Some(_), _) => Value::from("injected"),
                    (None, t) => json!(t),
                };
                let live = matches!(cfg.refine.transport, Some(crate::transport::TransportSpec::Live));
                json!({
                    "transport": transport,
                    "live": if live { json!(cfg.refine.live) } else { Value::Null },
                    "row_size": cfg.refine.row_size,
                    "batch_size": cfg.refine.batch_size,
                    "prompt": cfg.refine.prompt,
                })
            }
            Stage::Curate => json!({ "curate": cfg.curate, "seed": cfg.seed }),
            Stage::Vocab => json!({ "base_vocab": cfg.vocab.base_vocab, "format": cfg.vocab.format }),
            Stage::Stats => json!({}),
        })
    }

    fn hash_inputs(&self, stage: Stage) -> Result<BTreeMap<String, String>, String> {
        let mut out = BTreeMap::new();
        for input in self.inputs(stage) {
            let (label, path) = match input {
                Input::Work(rel) => (rel.to_string(), self.work(rel)),
                Input::Work2(rel) => (rel.clone(), self.work(&rel)),
                Input::External(name, p) => (format!("input:{name}"), p),
            };
            let bytes = read_bytes(&path).map_err(|e| format!("missing input {label}: {e}"))?;
            out.insert(label, sha256_hex(&bytes));
        }
        Ok(out)
    }

    /// Validates the configuration, then runs every enabled stage in order.
    pub fn run(&self, opts: RunOptions) -> Result<RunReport, RunError> {
        let diags = validate(self.cfg);
        if has_errors(&diags) {
            return Err(RunError::Config(diags.into_iter().filter(|d| d.severity == Severity::Error).collect()));
        }
        let manifest_path = self.work(MANIFEST);
        let previous = if manifest_path.exists() { Manifest::read(&manifest_path).unwrap_or_default() } else { Manifest::default() };
        let mut report = RunReport { warnings: diags, ..RunReport::default() };
        for stage in self.cfg.stage_list() {
            let started = Instant::now();
            let prepared = self.params(stage).and_then(|params| Ok((params, self.hash_inputs(stage)?)));
            let (params, inputs) = match prepared {
                Ok(p) => p,
                Err(message) => {
                    return Err(self.fail(&mut report, stage, String::new(), Value::Null, BTreeMap::new(), started, message))
                }
            };
            let input_hash = sha256_hex(
                serde_json::to_string(&json!({ "stage": stage, "params": params, "inputs": inputs }))
                    .expect("hash input serializes")
                    .as_bytes(),
            );
            let reusable = previous.get(stage).filter(|e| {
                !opts.force
                    && e.status == StageStatus::Ok
                    && e.input_hash == input_hash
                    && e.outputs.keys().all(|rel| self.work(rel).is_file())
            });
            if let Some(entry) = reusable {
                report.skipped.push(stage);
                report.manifest.stages.push(entry.clone());
                continue;
            }
            match self.execute(stage) {
                Ok(outputs) => {
                    let mut hashes = BTreeMap::new();
                    for rel in outputs {
                        let bytes = read_bytes(&self.work(&rel)).map_err(RunError::Manifest)?;
                        hashes.insert(rel, sha256_hex(&bytes));
                    }
                    let listing: String = hashes.iter().map(|(k, v)| format!("{k}\t{v}\n")).collect();
                    report.manifest.stages.push(ManifestEntry {
                        stage,
                        status: StageStatus::Ok,
                        input_hash,
                        inputs,
                        params,
                        output_hash: sha256_hex(listing.as_bytes()),
                        outputs: hashes,
                        wall_time_ms: started.elapsed().as_millis() as u64,
                        finished_at: now_secs(),
                        error: None,
                    });
                    report.executed.push(stage);
                    write_json(&manifest_path, &report.manifest).map_err(RunError::Manifest)?;
                }
                Err(message) => return Err(self.fail(&mut report, stage, input_hash, params, inputs, started, message)),
            }
        }
        write_json(&manifest_path, &report.manifest).map_err(RunError::Manifest)?;
        Ok(report)
    }

    #[allow(clippy::too_many_arguments)]
    fn fail(
        &self,
        report: &mut RunReport,
        stage: Stage,
        input_hash: String,
        params: Value,
        inputs: BTreeMap<String, String>,
        started: Instant,
        message: String,
    ) -> RunError {
        report.manifest.stages.push(ManifestEntry {
            stage,
            status: StageStatus::Failed,
            input_hash,
            inputs,
            params,
            output_hash: String::new(),
            outputs: BTreeMap::new(),
            wall_time_ms: started.elapsed().as_millis() as u64,
            finished_at: now_secs(),
            error: Some(message.clone()),
        });
        if let Err(e) = write_json(&self.work(MANIFEST), &report.manifest) {
            return RunError::Manifest(e);
        }
        RunError::Stage { stage, message }
    }

    fn execute(&self, stage: Stage) -> StageResult {
        match stage {
            Stage::Clean => self.clean(),
            Stage::Segment => self.segment(),
            Stage::Embed => self.embed(),
            Stage::Align => self.align(),
            Stage::Refine => self.refine(),
            Stage::Curate => self.curate(),
            Stage::Vocab => self.vocab(),
            Stage::Stats => self.stats(),
        }
    }

    fn clean(&self) -> StageResult {
        let docs = read_documents(&self.cfg.resolve(&self.cfg.input_docs)).map_err(err)?;
        let (cleaned, mut summary) = clean_documents(docs.documents, &self.cfg.clean);
        summary.malformed = docs.malformed;
        if cleaned.is_empty() {
            return Err("no documents left after cleaning".into());
        }
        write_jsonl(&self.work(CLEAN_DOCS), &cleaned).map_err(err)?;
        write_json(&self.work(CLEAN_REPORT), &summary).map_err(err)?;
        Ok(vec![CLEAN_DOCS.into(), CLEAN_REPORT.into()])
    }

    fn segment(&self) -> StageResult {
        let docs = match self.doc_source() {
            Input::Work(rel) => read_jsonl::<Document>(&self.work(rel)).map_err(err)?,
            Input::External(_, path) => read_documents(&path).map_err(err)?.documents,
            Input::Work2(_) => unreachable!("documents come from clean or the input file"),
        };
        let segmented = segment_documents(&docs, &self.cfg.segmenter().map_err(err)?);
        if segmented.is_empty() {
            return Err("no document has sentences on both sides".into());
        }
        write_jsonl(&self.work(SEGMENT_DOCS), &segmented).map_err(err)?;
        Ok(vec![SEGMENT_DOCS.into()])
    }

    fn embed(&self) -> StageResult {
        let docs: Vec<SegmentedDocument> = read_jsonl(&self.work(SEGMENT_DOCS)).map_err(err)?;
        let file_store;
        let provider: &(dyn EmbeddingProvider + Sync) = match &self.cfg.embed.provider {
            ProviderSpec::Builtin => &self.cfg.embed.builtin,
            ProviderSpec::File(p) => {
                file_store = VectorStore::read(&self.cfg.resolve(p)).map_err(err)?;
                &file_store
            }
        };
        let store = embed_documents(&docs, self.cfg.align.max_window, provider, self.cfg.workers)?;
        store.write(&self.work(VECTORS)).map_err(err)?;
        Ok(vec![VECTORS.into(), VECTOR_TEXTS.into()])
    }

    fn align(&self) -> StageResult {
        let docs: Vec<SegmentedDocument> = read_jsonl(&self.work(SEGMENT_DOCS)).map_err(err)?;
        let store = VectorStore::read(&self.work(VECTORS)).map_err(err)?;
        let pairs = align_documents(&docs, &store, &self.cfg.align, self.cfg.workers)?;
        write_pairs(&self.work(ALIGN_PAIRS), &pairs).map_err(err)?;
        Ok(vec![ALIGN_PAIRS.into()])
    }

    fn refine(&self) -> StageResult {
        let pairs = read_pairs(&self.work(ALIGN_PAIRS)).map_err(err)?;
        let opened;
        let transport: &(dyn RefineTransport + Sync) = match self.transport {
            Some(t) => t,
            None => {
                let spec = self.cfg.refine.transport.as_ref().ok_or("no refine transport configured")?;
                opened = spec.resolve(&self.cfg.base_dir).open(&self.cfg.refine.live)?;
                &*opened
            }
        };
        let result = refine_parallel(&pairs, &self.cfg.refine.core(), transport, self.cfg.workers)?;
        let summary = RefineSummary {
            pairs_in: pairs.len(),
            pairs_out: result.pairs.len(),
            calls: result.calls,
            accepted_edits: result.accepted,
            rejected_edits: result.rejected,
            review_rows: result.review.len(),
        };
        write_pairs(&self.work(REFINE_PAIRS), &result.pairs).map_err(err)?;
        write_jsonl(&self.work(REFINE_REVIEW), &result.review).map_err(err)?;
        write_json(&self.work(REFINE_SUMMARY), &summary).map_err(err)?;
        Ok(vec![REFINE_PAIRS.into(), REFINE_REVIEW.into(), REFINE_SUMMARY.into()])
    }

    fn curate(&self) -> StageResult {
        let pairs = read_pairs(&self.work(self.pair_source())).map_err(err)?;
        let dedup = deduplicate(&pairs);
        let spec = self.cfg.curate.split_spec(dedup.kept.len(), self.cfg.seed);
        let splits = make_splits(&dedup.kept, &spec).map_err(err)?;
        let mut outputs = Vec::new();
        let mut files = BTreeMap::new();
        for split in Split::ALL {
            let rel = split_file(split);
            write_pairs(&self.work(&rel), splits.get(split)).map_err(err)?;
            files.insert(split, format!("{}.jsonl", split.as_str()));
            outputs.push(rel);
        }
        write_jsonl::<DroppedPair>(&self.work(DROPPED), &dedup.dropped).map_err(err)?;
        let manifest = CurateManifest { counts: splits.manifest, spec, dropped_duplicates: dedup.dropped.len(), files };
        write_json(&self.work(SPLIT_MANIFEST), &manifest).map_err(err)?;
        outputs.extend([SPLIT_MANIFEST.to_string(), DROPPED.to_string()]);
        Ok(outputs)
    }

    fn vocab(&self) -> StageResult {
        let base_path = self.cfg.vocab.base_vocab.as_ref().ok_or("no base vocabulary configured")?;
        let base = load_vocabulary(&self.cfg.resolve(base_path), self.cfg.vocab.format).map_err(err)?;
        let train = read_pairs(&self.work(&split_file(Split::Train))).map_err(err)?;
        let outcome = adapt_vocab(&base, train.iter().map(|p| p.grc.as_str()))?;
        write_json(&self.work(MISSING), &outcome.missing).map_err(err)?;
        write_atomic(&self.work(PLAN), outcome.plan.to_jsonl().as_bytes()).map_err(err)?;
        write_atomic(&self.work(VOCAB), outcome.vocab.to_piece_list().as_bytes()).map_err(err)?;
        Ok(vec![MISSING.into(), PLAN.into(), VOCAB.into()])
    }

    fn stats(&self) -> StageResult {
        let (pairs, assignment) = if self.cfg.enabled(Stage::Curate) {
            load_split_assignment(&self.work(SPLIT_MANIFEST)).map_err(err)?
        } else {
            (read_pairs(&self.work(self.pair_source())).map_err(err)?, BTreeMap::new())
        };
        let card = data_card(&pairs, &assignment)?;
        write_atomic(&self.work(CARD_TEXT), card.text.as_bytes()).map_err(err)?;
        write_atomic(&self.work(CARD_JSON), card.json_string().as_bytes()).map_err(err)?;
        Ok(vec![CARD_TEXT.into(), CARD_JSON.into()])
    }
}

pub fn data_card(pairs: &[SentencePair], assignment: &BTreeMap<String, Split>) -> Result<DataCard, String> {
    compute_stats(pairs, assignment).map(|s| render_data_card(&s)).map_err(err)
}
