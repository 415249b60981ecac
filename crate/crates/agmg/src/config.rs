//! Pipeline configuration: loading from TOML or JSON, defaults, and
//! validation diagnostics.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use agmg_core::align::AlignConfig;
use agmg_core::curate::{DialectMix, SplitSpec};
use agmg_core::embed::HashEmbedder;
use agmg_core::model::{Dialect, Document};
use agmg_core::normalize::CleanOptions;
use agmg_core::refine::{PromptConfig, RefineConfig};
use agmg_core::segment::SegmenterConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::io::{read_documents, read_text};
use crate::transport::{LiveConfig, TransportSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Clean,
    Segment,
    Embed,
    Align,
    Refine,
    Curate,
    Vocab,
    Stats,
}

impl Stage {
    /// Execution order.
    pub const ALL: [Stage; 8] =
        [Stage::Clean, Stage::Segment, Stage::Embed, Stage::Align, Stage::Refine, Stage::Curate, Stage::Vocab, Stage::Stats];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Clean => "clean",
            Stage::Segment => "segment",
            Stage::Embed => "embed",
            Stage::Align => "align",
            Stage::Refine => "refine",
            Stage::Curate => "curate",
            Stage::Vocab => "vocab",
            Stage::Stats => "stats",
        }
    }

    /// Stages that must also be enabled.
    pub fn requires(self) -> &'static [Stage] {
        match self {
            Stage::Clean | Stage::Segment => &[],
            Stage::Embed => &[Stage::Segment],
            Stage::Align => &[Stage::Segment, Stage::Embed],
            Stage::Refine | Stage::Curate => &[Stage::Align],
            Stage::Vocab => &[Stage::Curate],
            Stage::Stats => &[Stage::Align],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Stage::ALL.into_iter().find(|st| st.as_str() == s).ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

/// `builtin` or `file:<path>`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum ProviderSpec {
    #[default]
    Builtin,
    File(PathBuf),
}

impl FromStr for ProviderSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            None if s == "builtin" => Ok(ProviderSpec::Builtin),
            Some(("file", path)) if !path.is_empty() => Ok(ProviderSpec::File(PathBuf::from(path))),
            _ => Err(format!("unknown embedding provider {s:?} (expected builtin or file:<path>)")),
        }
    }
}

impl fmt::Display for ProviderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderSpec::Builtin => f.write_str("builtin"),
            ProviderSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl Serialize for ProviderSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ProviderSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentStage {
    pub ano_teleia_boundary: bool,
    /// Replaces the built-in abbreviation list.
    pub abbreviations: Option<Vec<String>>,
    /// File with one abbreviation per line, added to the list.
    pub abbreviations_file: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedStage {
    pub provider: ProviderSpec,
    pub builtin: HashEmbedder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineStage {
    pub transport: Option<TransportSpec>,
    pub live: LiveConfig,
    pub row_size: usize,
    pub batch_size: usize,
    pub prompt: PromptConfig,
}

impl Default for RefineStage {
    fn default() -> Self {
        let core = RefineConfig::default();
        RefineStage {
            transport: None,
            live: LiveConfig::default(),
            row_size: core.row_size,
            batch_size: core.batch_size,
            prompt: core.prompt,
        }
    }
}

impl RefineStage {
    pub fn core(&self) -> RefineConfig {
        RefineConfig { row_size: self.row_size, batch_size: self.batch_size, prompt: self.prompt.clone() }
    }
}

/// Split sizes default to the reference split scaled to the corpus size.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurateStage {
    pub dev_pairs: Option<usize>,
    pub test_pairs: Option<usize>,
    pub stress_pairs: Option<usize>,
    pub stress_dialects: Option<BTreeSet<Dialect>>,
    pub dev_test_mix: Option<DialectMix>,
    pub stress_mix: Option<DialectMix>,
    /// Defaults to the top-level seed.
    pub seed: Option<u64>,
}

impl CurateStage {
    pub fn split_spec(&self, total: usize, seed: u64) -> SplitSpec {
        let mut spec = SplitSpec::proportional(total);
        if let Some(n) = self.dev_pairs {
            spec.dev_pairs = n;
        }
        if let Some(n) = self.test_pairs {
            spec.test_pairs = n;
        }
        if let Some(n) = self.stress_pairs {
            spec.stress_pairs = n;
        }
        if let Some(d) = &self.stress_dialects {
            spec.stress_dialects = d.clone();
        }
        if let Some(m) = &self.dev_test_mix {
            spec.dev_test_mix = m.clone();
        }
        if let Some(m) = &self.stress_mix {
            spec.stress_mix = m.clone();
        }
        spec.train_pairs = total.saturating_sub(spec.dev_pairs + spec.test_pairs + spec.stress_pairs);
        spec.seed = self.seed.unwrap_or(seed);
        spec
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VocabFormat {
    /// One piece per line.
    #[default]
    Pieces,
    /// JSON object of token to id.
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabStage {
    pub base_vocab: Option<PathBuf>,
    pub format: VocabFormat,
}

pub const DEFAULT_SEED: u64 = 13;

fn default_stages() -> Vec<String> {
    Stage::ALL.iter().map(|s| s.as_str().to_string()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input_docs: PathBuf,
    pub workdir: PathBuf,
    /// Stage names; checked by [`validate`].
    pub stages: Vec<String>,
    pub seed: u64,
    pub workers: usize,
    pub clean: CleanOptions,
    pub segment: SegmentStage,
    pub embed: EmbedStage,
    pub align: AlignConfig,
    pub refine: RefineStage,
    pub curate: CurateStage,
    pub vocab: VocabStage,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input_docs: PathBuf::from("documents.jsonl"),
            workdir: PathBuf::from("work"),
            stages: default_stages(),
            seed: DEFAULT_SEED,
            workers: 4,
            clean: CleanOptions::default(),
            segment: SegmentStage::default(),
            embed: EmbedStage::default(),
            align: AlignConfig { seed: DEFAULT_SEED, ..AlignConfig::default() },
            refine: RefineStage::default(),
            curate: CurateStage::default(),
            vocab: VocabStage::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    File(#[from] crate::io::FileError),
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

impl PipelineConfig {
    /// Parses TOML, or JSON when the file name ends in `.json`. The top-level
    /// seed also seeds alignment unless `[align]` sets its own.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = read_text(path)?;
        let parse_err = |message: String| ConfigError::Parse { path: path.to_path_buf(), message };
        let raw: Value = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        };
        let mut cfg = Self::from_value(raw).map_err(parse_err)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if cfg.base_dir.as_os_str().is_empty() {
            cfg.base_dir = PathBuf::from(".");
        }
        Ok(cfg)
    }

    pub fn from_value(raw: Value) -> Result<Self, String> {
        let align_seed = raw.pointer("/align/seed").is_some();
        let mut cfg: PipelineConfig = serde_json::from_value(raw).map_err(|e| e.to_string())?;
        if !align_seed {
            cfg.align.seed = cfg.seed;
        }
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn workdir_path(&self) -> PathBuf {
        self.resolve(&self.workdir)
    }

    /// Parsed stage list; unknown names are dropped (and reported by `validate`).
    pub fn stage_list(&self) -> Vec<Stage> {
        self.stages.iter().filter_map(|s| s.parse().ok()).collect()
    }

    pub fn enabled(&self, stage: Stage) -> bool {
        self.stage_list().contains(&stage)
    }

    /// Segmenter settings with the abbreviation file merged in.
    pub fn segmenter(&self) -> Result<SegmenterConfig, crate::io::FileError> {
        let mut cfg = SegmenterConfig { ano_teleia_boundary: self.segment.ano_teleia_boundary, ..SegmenterConfig::default() };
        if let Some(list) = &self.segment.abbreviations {
            cfg.abbreviations = list.clone();
        }
        if let Some(file) = &self.segment.abbreviations_file {
            for a in SegmenterConfig::parse_abbreviations(&read_text(&self.resolve(file))?) {
                if !cfg.abbreviations.contains(&a) {
                    cfg.abbreviations.push(a);
                }
            }
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    fn error(message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, message: message.into() }
    }

    fn warning(message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

fn check_stages(cfg: &PipelineConfig, out: &mut Vec<Diagnostic>) {
    let mut parsed = Vec::new();
    for name in &cfg.stages {
        match name.parse::<Stage>() {
            Ok(s) if parsed.contains(&s) => out.push(Diagnostic::error(format!("stage {s} is listed twice"))),
            Ok(s) => parsed.push(s),
            Err(e) => out.push(Diagnostic::error(e)),
        }
    }
    if parsed.is_empty() {
        out.push(Diagnostic::error("no stages to run"));
    }
    if parsed.windows(2).any(|w| w[0] > w[1]) {
        let order: Vec<&str> = Stage::ALL.iter().map(|s| s.as_str()).collect();
        out.push(Diagnostic::error(format!("stages must follow the order {}", order.join(" → "))));
    }
    for s in &parsed {
        for dep in s.requires() {
            if !parsed.contains(dep) {
                out.push(Diagnostic::error(format!("stage {s} needs stage {dep}")));
            }
        }
    }
}

fn check_documents(cfg: &PipelineConfig, docs: &[Document], out: &mut Vec<Diagnostic>) {
    if docs.is_empty() {
        out.push(Diagnostic::error("input has no documents"));
        return;
    }
    if !cfg.enabled(Stage::Curate) {
        return;
    }
    let total = docs.len();
    let spec = cfg.curate.split_spec(total, cfg.seed);
    if spec.stress_pairs > 0 && !docs.iter().any(|d| spec.stress_dialects.contains(&d.meta.dialect)) {
        let names: Vec<&str> = spec.stress_dialects.iter().map(|d| d.as_str()).collect();
        out.push(Diagnostic::error(format!(
            "stress split requested but no document has a stress dialect ({})",
            names.join(", ")
        )));
    }
    for (d, _) in spec.stress_mix.iter().filter(|_| spec.stress_pairs > 0) {
        if !docs.iter().any(|doc| doc.meta.dialect == *d) {
            out.push(Diagnostic::warning(format!("stress mix names {} but no document has it", d.as_str())));
        }
    }
}

/// Schema and cross-field checks. Reads the input documents but runs nothing.
pub fn validate(cfg: &PipelineConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    check_stages(cfg, &mut out);
    if cfg.workers == 0 {
        out.push(Diagnostic::error("workers must be at least 1"));
    }
    if let Err(e) = cfg.align.validate() {
        out.push(Diagnostic::error(e.to_string()));
    }
    if cfg.embed.builtin.dimension == 0 || cfg.embed.builtin.max_order == 0 {
        out.push(Diagnostic::error("embed.builtin dimension and max_order must be at least 1"));
    }
    if let ProviderSpec::File(p) = &cfg.embed.provider {
        if !cfg.resolve(p).is_file() {
            out.push(Diagnostic::error(format!("embedding vector file {} does not exist", p.display())));
        }
    }
    if cfg.enabled(Stage::Refine) {
        match &cfg.refine.transport {
            None => out.push(Diagnostic::error("stage refine needs refine.transport (live or replay:<path>)")),
            Some(TransportSpec::Replay(p)) if !cfg.resolve(p).is_file() => {
                out.push(Diagnostic::error(format!("replay fixture {} does not exist", p.display())))
            }
            Some(TransportSpec::Live) if std::env::var_os(&cfg.refine.live.api_key_env).is_none() => out.push(
                Diagnostic::error(format!("live transport needs the {} environment variable", cfg.refine.live.api_key_env)),
            ),
            _ => {}
        }
        if cfg.refine.batch_size == 0 || cfg.refine.row_size == 0 {
            out.push(Diagnostic::error("refine.batch_size and refine.row_size must be at least 1"));
        }
    }
    if cfg.enabled(Stage::Vocab) {
        match &cfg.vocab.base_vocab {
            None => out.push(Diagnostic::error("stage vocab needs vocab.base_vocab")),
            Some(p) if !cfg.resolve(p).is_file() => {
                out.push(Diagnostic::error(format!("base vocabulary {} does not exist", p.display())))
            }
            _ => {}
        }
    }
    if let Some(p) = &cfg.segment.abbreviations_file {
        if !cfg.resolve(p).is_file() {
            out.push(Diagnostic::error(format!("abbreviation file {} does not exist", p.display())));
        }
    }
    let spec = cfg.curate.split_spec(0, cfg.seed);
    if let Err(e) = spec.validate() {
        out.push(Diagnostic::error(e.to_string()));
    }
    let workdir = cfg.workdir_path();
    if workdir.exists() && !workdir.is_dir() {
        out.push(Diagnostic::error(format!("workdir {} is not a directory", cfg.workdir.display())));
    }
    match read_documents(&cfg.resolve(&cfg.input_docs)) {
        Err(e) => out.push(Diagnostic::error(format!("cannot read input documents: {e}"))),
        Ok(docs) => {
            for bad in &docs.malformed {
                out.push(Diagnostic::warning(format!(
                    "{} line {}: {} (skipped)",
                    cfg.input_docs.display(),
                    bad.line,
                    bad.message
                )));
            }
            check_documents(cfg, &docs.documents, &mut out);
        }
    }
    out
}
