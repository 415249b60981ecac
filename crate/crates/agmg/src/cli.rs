//! Command-line verbs: one per stage plus `run`, `validate`, `score` and `synth`.

use std::io::Write;
use std::path::{Path, PathBuf};

use agmg_core::align::{AlignConfig, AlignMode};
use agmg_core::curate::SplitSpec;
use agmg_core::embed::{EmbeddingProvider, HashEmbedder};
use agmg_core::metrics::{score, BleuTokenizer, MetricConfig};
use agmg_core::model::{Document, Side};
use agmg_core::normalize::{clean_text, CleanOptions};
use agmg_core::refine::RefineConfig;
use agmg_core::segment::{segment_texts, SegmenterConfig};
use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{has_errors, validate, ConfigError, PipelineConfig, ProviderSpec, VocabFormat};
use crate::io::{read_documents, read_json, read_jsonl, read_pairs, read_text, write_atomic, write_json, write_jsonl, write_pairs};
use crate::pipeline::{
    adapt_vocab, align_documents, clean_documents, data_card, embed_documents, load_split_assignment, load_vocabulary,
    refine_parallel, segment_documents, CurateManifest, Pipeline, RunError, RunOptions, SegmentedDocument,
};
use crate::transport::{LiveConfig, RecordingTransport, TransportSpec};
use crate::vectors::VectorStore;

#[derive(Parser, Debug)]
#[command(name = "agmg", version, about = "Build and evaluate Ancient/Modern Greek parallel corpora")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Strip markup and editorial noise.
    Clean(CleanArgs),
    /// Split text into sentences.
    Segment(SegmentArgs),
    /// Embed every overlap window of segmented documents.
    Embed(EmbedArgs),
    /// Align segmented documents into sentence pairs.
    Align(AlignArgs),
    /// Fix alignment errors with a language model.
    Refine(RefineArgs),
    /// Deduplicate pairs and assign splits.
    Curate(CurateArgs),
    /// Extend a tokenizer vocabulary with the characters a corpus needs.
    VocabAdapt(VocabArgs),
    /// BLEU, chrF, chrF++ and TER of a hypothesis file against references.
    Score(ScoreArgs),
    /// Corpus statistics and data card.
    Stats(StatsArgs),
    /// Run the configured pipeline.
    Run(RunArgs),
    /// Check a pipeline configuration without running it.
    Validate(ValidateArgs),
    /// Write the synthetic fixture corpus and its replay file.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SideArg {
    Grc,
    Ell,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Side {
        match s {
            SideArg::Grc => Side::Grc,
            SideArg::Ell => Side::Ell,
        }
    }
}

#[derive(Args, Debug)]
pub struct CleanArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Treat the input as plain text of one side instead of document JSONL.
    #[arg(long, value_enum)]
    pub side: Option<SideArg>,
    #[arg(long)]
    pub keep_bracket_content: bool,
    #[arg(long)]
    pub fold_oxia: bool,
    /// Cleaning counts as JSON (document mode only).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SegmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Treat the input as plain text of one side; writes one sentence per line.
    #[arg(long, value_enum)]
    pub side: Option<SideArg>,
    #[arg(long)]
    pub ano_teleia_boundary: bool,
    /// Extra abbreviations, one per line.
    #[arg(long)]
    pub abbreviations: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EmbedArgs {
    /// Segmented documents (JSONL).
    #[arg(long)]
    pub input: PathBuf,
    /// Vector file to write; the text listing goes next to it.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value = "builtin")]
    pub provider: ProviderSpec,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Fast,
    Exhaustive,
}

#[derive(Args, Debug)]
pub struct AlignArgs {
    /// Segmented documents (JSONL).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Vectors from `embed`; without it the built-in embedder is used.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub skip_cost: f64,
    #[arg(long, default_value_t = 10)]
    pub band: usize,
    #[arg(long, default_value_t = 13)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "fast")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
}

#[derive(Args, Debug)]
pub struct RefineArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// `live` or `replay:<path>`.
    #[arg(long)]
    pub transport: TransportSpec,
    #[arg(long, default_value_t = 20)]
    pub batch: usize,
    #[arg(long, default_value_t = 8)]
    pub row_size: usize,
    /// Rows that need a human look.
    #[arg(long)]
    pub review: Option<PathBuf>,
    /// Save every prompt and response as a replay file.
    #[arg(long)]
    pub record: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
}

#[derive(Args, Debug)]
pub struct CurateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Split sizes and mixes as JSON; defaults scale with the corpus.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VocabFormatArg {
    Pieces,
    Json,
}

#[derive(Args, Debug)]
pub struct VocabArgs {
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long, value_enum, default_value = "pieces")]
    pub format: VocabFormatArg,
    /// Plain text, or pair JSONL (its Ancient Greek side is used).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Transplant plan (JSONL).
    #[arg(long)]
    pub out: PathBuf,
    /// Extended vocabulary as a piece list.
    #[arg(long)]
    pub vocab_out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TokenizerArg {
    #[value(name = "13a")]
    ThirteenA,
    Intl,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// One hypothesis per line.
    #[arg(long)]
    pub hyp: PathBuf,
    /// One reference per line.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long, value_enum, default_value = "13a")]
    pub tokenizer: TokenizerArg,
    #[arg(long, default_value_t = 2)]
    pub chrf_word_order: usize,
    /// Include per-segment scores.
    #[arg(long)]
    pub segments: bool,
    /// Metric settings as JSON; flags above override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Pairs to describe; defaults to the union of the split files.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Split manifest written by `curate`.
    #[arg(long)]
    pub splits: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Machine-readable card.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the configured work directory.
    #[arg(long)]
    pub workdir: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
}

/// Exit statuses.
pub const OK: i32 = 0;
pub const FAILURE: i32 = 1;
pub const CONFIG_ERROR: i32 = 2;

/// An error and the status it exits with.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: anyhow::Error,
}

impl From<anyhow::Error> for CliError {
    fn from(error: anyhow::Error) -> Self {
        CliError { code: FAILURE, error }
    }
}

fn config_error(error: impl Into<anyhow::Error>) -> CliError {
    CliError { code: CONFIG_ERROR, error: error.into() }
}

/// Runs one parsed command, reporting to `out` and `err`.
pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match dispatch(cli.command, out, err) {
        Ok(()) => OK,
        Err(e) => {
            let _ = writeln!(err, "error: {:#}", e.error);
            e.code
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Clean(a) => clean(a, err),
        Command::Segment(a) => segment(a),
        Command::Embed(a) => embed(a, out),
        Command::Align(a) => align(a, out),
        Command::Refine(a) => refine(a, out),
        Command::Curate(a) => curate(a, out),
        Command::VocabAdapt(a) => vocab(a, out),
        Command::Score(a) => score_cmd(a, out),
        Command::Stats(a) => stats(a, out),
        Command::Run(a) => run(a, out, err),
        Command::Validate(a) => validate_cmd(a, out),
        Command::Synth(a) => synth(a, out),
    }
}

fn clean(a: CleanArgs, err: &mut dyn Write) -> Result<(), CliError> {
    let opts = CleanOptions { keep_bracket_content: a.keep_bracket_content, fold_oxia: a.fold_oxia, ..CleanOptions::default() };
    if let Some(side) = a.side {
        let (text, _) = clean_text(&read_text(&a.input).map_err(anyhow::Error::from)?, side.into(), &opts);
        write_atomic(&a.output, format!("{text}\n").as_bytes()).map_err(anyhow::Error::from)?;
        return Ok(());
    }
    let docs = read_documents(&a.input).map_err(anyhow::Error::from)?;
    for bad in &docs.malformed {
        let _ = writeln!(err, "warning: {}:{}: {}", a.input.display(), bad.line, bad.message);
    }
    let (cleaned, mut summary) = clean_documents(docs.documents, &opts);
    summary.malformed = docs.malformed;
    write_jsonl(&a.output, &cleaned).map_err(anyhow::Error::from)?;
    if let Some(r) = &a.report {
        write_json(r, &summary).map_err(anyhow::Error::from)?;
    }
    Ok(())
}

fn segmenter(a: &SegmentArgs) -> anyhow::Result<SegmenterConfig> {
    let mut cfg = SegmenterConfig { ano_teleia_boundary: a.ano_teleia_boundary, ..SegmenterConfig::default() };
    if let Some(p) = &a.abbreviations {
        for abbr in SegmenterConfig::parse_abbreviations(&read_text(p)?) {
            if !cfg.abbreviations.contains(&abbr) {
                cfg.abbreviations.push(abbr);
            }
        }
    }
    Ok(cfg)
}

fn segment(a: SegmentArgs) -> Result<(), CliError> {
    let cfg = segmenter(&a)?;
    if let Some(side) = a.side {
        let sentences = segment_texts(&read_text(&a.input).map_err(anyhow::Error::from)?, side.into(), &cfg);
        let body: String = sentences.iter().map(|s| format!("{s}\n")).collect();
        write_atomic(&a.output, body.as_bytes()).map_err(anyhow::Error::from)?;
        return Ok(());
    }
    let docs: Vec<Document> = read_jsonl(&a.input).map_err(anyhow::Error::from)?;
    write_jsonl(&a.output, &segment_documents(&docs, &cfg)).map_err(anyhow::Error::from)?;
    Ok(())
}

fn embed(a: EmbedArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let docs: Vec<SegmentedDocument> = read_jsonl(&a.input).map_err(anyhow::Error::from)?;
    let builtin = HashEmbedder::default();
    let file_store;
    let provider: &(dyn EmbeddingProvider + Sync) = match &a.provider {
        ProviderSpec::Builtin => &builtin,
        ProviderSpec::File(p) => {
            file_store = VectorStore::read(p).map_err(anyhow::Error::from)?;
            &file_store
        }
    };
    if a.k == 0 {
        return Err(config_error(anyhow!("--k must be at least 1")));
    }
    let store = embed_documents(&docs, a.k, provider, a.workers).map_err(|e| anyhow!(e))?;
    store.write(&a.output).map_err(anyhow::Error::from)?;
    let _ = writeln!(out, "{} vectors of dimension {}", store.len(), store.file.dimension);
    Ok(())
}

fn align(a: AlignArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = AlignConfig {
        mode: match a.mode {
            ModeArg::Fast => AlignMode::Fast,
            ModeArg::Exhaustive => AlignMode::Exhaustive,
        },
        max_window: a.k,
        skip_cost: a.skip_cost,
        band_width: a.band,
        seed: a.seed,
        ..AlignConfig::default()
    };
    cfg.validate().map_err(config_error)?;
    let docs: Vec<SegmentedDocument> = read_jsonl(&a.input).map_err(anyhow::Error::from)?;
    let builtin = HashEmbedder::default();
    let store;
    let provider: &(dyn EmbeddingProvider + Sync) = match &a.vectors {
        Some(p) => {
            store = VectorStore::read(p).map_err(anyhow::Error::from)?;
            &store
        }
        None => &builtin,
    };
    let pairs = align_documents(&docs, provider, &cfg, a.workers).map_err(|e| anyhow!(e))?;
    write_pairs(&a.output, &pairs).map_err(anyhow::Error::from)?;
    let _ = writeln!(out, "{} pairs from {} documents", pairs.len(), docs.len());
    Ok(())
}

fn refine(a: RefineArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.batch == 0 || a.row_size == 0 {
        return Err(config_error(anyhow!("--batch and --row-size must be at least 1")));
    }
    let pairs = read_pairs(&a.input).map_err(anyhow::Error::from)?;
    let transport = a.transport.open(&LiveConfig::default()).map_err(config_error_msg)?;
    let cfg = RefineConfig { row_size: a.row_size, batch_size: a.batch, ..RefineConfig::default() };
    let result = match &a.record {
        Some(path) => {
            let recorder = RecordingTransport::new(transport);
            let r = refine_parallel(&pairs, &cfg, &recorder, a.workers).map_err(|e| anyhow!(e))?;
            recorder.write(path).map_err(anyhow::Error::from)?;
            r
        }
        None => refine_parallel(&pairs, &cfg, &*transport, a.workers).map_err(|e| anyhow!(e))?,
    };
    write_pairs(&a.output, &result.pairs).map_err(anyhow::Error::from)?;
    if let Some(p) = &a.review {
        write_jsonl(p, &result.review).map_err(anyhow::Error::from)?;
    }
    let _ = writeln!(
        out,
        "{} calls, {} edits accepted, {} rejected, {} rows for review",
        result.calls,
        result.accepted,
        result.rejected,
        result.review.len()
    );
    Ok(())
}

fn config_error_msg(m: String) -> CliError {
    config_error(anyhow!(m))
}

fn curate(a: CurateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let pairs = read_pairs(&a.input).map_err(anyhow::Error::from)?;
    let dedup = agmg_core::curate::deduplicate(&pairs);
    let mut spec = match &a.spec {
        Some(p) => read_json::<SplitSpec>(p).map_err(config_error)?,
        None => SplitSpec::proportional(dedup.kept.len()),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    spec.validate().map_err(config_error)?;
    let splits = agmg_core::curate::make_splits(&dedup.kept, &spec).map_err(|e| anyhow!(e))?;
    let mut files = std::collections::BTreeMap::new();
    for split in agmg_core::model::Split::ALL {
        let name = format!("{}.jsonl", split.as_str());
        write_pairs(&a.out_dir.join(&name), splits.get(split)).map_err(anyhow::Error::from)?;
        files.insert(split, name);
    }
    write_jsonl(&a.out_dir.join("dropped.jsonl"), &dedup.dropped).map_err(anyhow::Error::from)?;
    let manifest = CurateManifest { counts: splits.manifest, spec, dropped_duplicates: dedup.dropped.len(), files };
    write_json(&a.out_dir.join("manifest.json"), &manifest).map_err(anyhow::Error::from)?;
    for (split, counts) in &manifest.counts.splits {
        let _ = writeln!(out, "{:<6} {:>6} pairs {:>5} rows", split.as_str(), counts.pairs, counts.rows);
    }
    Ok(())
}

fn vocab(a: VocabArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let format = match a.format {
        VocabFormatArg::Pieces => VocabFormat::Pieces,
        VocabFormatArg::Json => VocabFormat::Json,
    };
    let base = load_vocabulary(&a.vocab, format).map_err(anyhow::Error::from)?;
    let corpus: Vec<String> = if a.corpus.extension().is_some_and(|e| e == "jsonl") {
        read_pairs(&a.corpus).map_err(anyhow::Error::from)?.into_iter().map(|p| p.grc).collect()
    } else {
        read_text(&a.corpus).map_err(anyhow::Error::from)?.lines().map(String::from).collect()
    };
    let outcome = adapt_vocab(&base, corpus.iter().map(String::as_str)).map_err(|e| anyhow!(e))?;
    write_atomic(&a.out, outcome.plan.to_jsonl().as_bytes()).map_err(anyhow::Error::from)?;
    if let Some(p) = &a.vocab_out {
        write_atomic(p, outcome.vocab.to_piece_list().as_bytes()).map_err(anyhow::Error::from)?;
    }
    let _ = writeln!(
        out,
        "{} missing characters, {} added, {} unresolved",
        outcome.missing.chars.len(),
        outcome.plan.entries.len(),
        outcome.plan.unresolved.len()
    );
    Ok(())
}

fn lines(path: &Path) -> anyhow::Result<Vec<String>> {
    Ok(read_text(path)?.lines().map(String::from).collect())
}

fn score_cmd(a: ScoreArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = match &a.config {
        Some(p) => read_json::<MetricConfig>(p).map_err(config_error)?,
        None => MetricConfig::default(),
    };
    cfg.bleu_tokenizer = match a.tokenizer {
        TokenizerArg::ThirteenA => BleuTokenizer::ThirteenA,
        TokenizerArg::Intl => BleuTokenizer::Intl,
    };
    cfg.chrf_word_order = a.chrf_word_order;
    let hyps = lines(&a.hyp)?;
    let refs = lines(&a.reference)?;
    let h: Vec<&str> = hyps.iter().map(String::as_str).collect();
    let r: Vec<&str> = refs.iter().map(String::as_str).collect();
    let report = score(&h, &r, &cfg, a.segments).map_err(|e| anyhow!(e))?;
    let _ = write!(out, "{}", crate::io::to_json_pretty(&report));
    Ok(())
}

fn stats(a: StatsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (pairs, assignment) = match (&a.pairs, &a.splits) {
        (Some(p), Some(s)) => (read_pairs(p).map_err(anyhow::Error::from)?, load_split_assignment(s).map_err(anyhow::Error::from)?.1),
        (None, Some(s)) => load_split_assignment(s).map_err(anyhow::Error::from)?,
        (Some(p), None) => (read_pairs(p).map_err(anyhow::Error::from)?, Default::default()),
        (None, None) => return Err(config_error(anyhow!("give --pairs, --splits or both"))),
    };
    let card = data_card(&pairs, &assignment).map_err(|e| anyhow!(e))?;
    write_atomic(&a.out, card.text.as_bytes()).map_err(anyhow::Error::from)?;
    if let Some(j) = &a.json {
        write_atomic(j, card.json_string().as_bytes()).map_err(anyhow::Error::from)?;
    }
    let _ = write!(out, "{}", card.text);
    Ok(())
}

fn load_config(path: &Path) -> Result<PipelineConfig, CliError> {
    PipelineConfig::load(path).map_err(|e: ConfigError| config_error(e))
}

fn run(a: RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = load_config(&a.config)?;
    if let Some(w) = a.workdir {
        cfg.workdir = std::path::absolute(&w).context("resolving --workdir")?;
    }
    match Pipeline::new(&cfg).run(RunOptions { force: a.force }) {
        Ok(report) => {
            for w in &report.warnings {
                let _ = writeln!(err, "{w}");
            }
            for e in &report.manifest.stages {
                let tag = if report.executed.contains(&e.stage) { "ran" } else { "skipped" };
                let _ = writeln!(out, "{:<8} {tag:<8} {:>6} ms", e.stage.as_str(), e.wall_time_ms);
            }
            Ok(())
        }
        Err(e @ RunError::Config(_)) => Err(config_error(e)),
        Err(e) => Err(CliError { code: e.exit_code(), error: e.into() }),
    }
}

fn validate_cmd(a: ValidateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(&a.config)?;
    let diags = validate(&cfg);
    for d in &diags {
        let _ = writeln!(out, "{d}");
    }
    if has_errors(&diags) {
        return Err(config_error(anyhow!("configuration has errors")));
    }
    let _ = writeln!(out, "configuration is valid");
    Ok(())
}

fn synth(a: SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let scratch = a.out.join(".synth-work");
    let result = crate::fixture::write_fixture(&a.out, &scratch);
    let _ = std::fs::remove_dir_all(&scratch);
    result.map_err(|e| anyhow!(e))?;
    let _ = writeln!(out, "fixture written to {}", a.out.display());
    Ok(())
}
