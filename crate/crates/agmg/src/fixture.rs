//! Generator for the bundled synthetic corpus and its recorded refinement
//! responses.

use std::path::Path;

use agmg_core::model::{Dialect, Document, ExtraFields, Metadata, Side};
use agmg_core::refine::{EditOp, RefineEdit, RefineRow, RefineTransport, TransportError};
use agmg_core::synth::{synth_document, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::PipelineConfig;
use crate::io::{write_atomic, write_documents, FileError};
use crate::pipeline::{Pipeline, RunError, RunOptions};
use crate::transport::RecordingTransport;

pub const DOCUMENTS: &str = "documents.jsonl";
pub const BASE_VOCAB: &str = "base_vocab.txt";
pub const REPLAY: &str = "replay.jsonl";
pub const CONFIG: &str = "pipeline.toml";

pub const PIPELINE_TOML: &str = r#"input_docs = "documents.jsonl"
workdir = "work"
seed = 13
workers = 4

[refine]
transport = "replay:replay.jsonl"
row_size = 4
batch_size = 20

[curate]
dev_pairs = 30
test_pairs = 30
stress_pairs = 20

[vocab]
base_vocab = "base_vocab.txt"
"#;

/// Documents per dialect; two of the Koine ones arrive prealigned.
const PLAN: [(Dialect, usize); 5] =
    [(Dialect::Attic, 24), (Dialect::HellenisticKoine, 14), (Dialect::Ionic, 8), (Dialect::Doric, 6), (Dialect::HomericEpic, 6)];

fn meta(dialect: Dialect, n: usize) -> Metadata {
    Metadata {
        author: format!("{} author {}", dialect.as_str(), n % 5),
        title: format!("Work {n:02}"),
        segment_index: n as u64,
        url: format!("https://example.org/texts/{n:02}"),
        translator: "Translator A".into(),
        genre: if matches!(dialect, Dialect::HomericEpic) { "epic".into() } else { "prose".into() },
        era: "synthetic".into(),
        ..Metadata::new(dialect)
    }
}

/// Seeded corpus of 60 documents with cleaning noise, one multi-reference
/// excerpt, one duplicate and a character no basic-Greek vocabulary covers.
pub fn synth_documents(seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::new();
    let mut n = 0;
    for (dialect, count) in PLAN {
        for k in 0..count {
            let prealigned = dialect == Dialect::HellenisticKoine && k < 2;
            let (merge_rate, split_rate, deletion_rate) = if prealigned { (0.0, 0.0, 0.0) } else { (0.1, 0.1, 0.02) };
            let s = synth_document(&SynthConfig {
                sentences: rng.random_range(4..=12),
                merge_rate,
                split_rate,
                deletion_rate,
                seed: seed.wrapping_mul(1000).wrapping_add(n as u64),
            });
            docs.push(Document {
                id: format!("doc-{n:03}"),
                grc_text: s.grc.join(" "),
                ell_text: s.ell.join(" "),
                meta: meta(dialect, n),
                prealigned,
                extra: ExtraFields::new(),
            });
            n += 1;
        }
    }
    // Noise the cleaner has to remove.
    docs[0].grc_text = format!("<p>{}</p>", docs[0].grc_text);
    docs[0].ell_text = format!("<p>{}</p> &amp;", docs[0].ell_text);
    docs[1].grc_text = docs[1].grc_text.replacen(". ", ".\n17\n", 1);
    docs[2].grc_text = docs[2].grc_text.replacen(' ', " [ἔτι] ", 1);
    docs[3].ell_text = docs[3].ell_text.replacen(". ", " (Σ.τ.Μ. διόρθωση). ", 1);

    // A second translation of document 5.
    let mut twin = synth_document(&SynthConfig { sentences: 6, seed: seed ^ 0x5eed, ..SynthConfig::default() });
    twin.grc[0] = format!("† {}", twin.grc[0]);
    let mut twin_meta = docs[5].meta.clone();
    twin_meta.translator = "Translator B".into();
    docs[5].grc_text = twin.grc.join(" ");
    docs[5].ell_text = twin.ell.join(" ");
    docs.push(Document {
        id: format!("doc-{n:03}"),
        grc_text: twin.grc.join(" "),
        ell_text: twin.ell.iter().map(|s| s.replace("και", "κι")).collect::<Vec<_>>().join(" "),
        meta: twin_meta,
        prealigned: false,
        extra: ExtraFields::new(),
    });
    n += 1;

    let mut dup = docs[30].clone();
    dup.id = format!("doc-{n:03}");
    dup.meta.url = format!("https://example.org/mirror/{n:02}");
    docs.push(dup);
    docs
}

/// Single characters of basic Greek plus ASCII digits and punctuation.
pub fn basic_greek_vocab() -> String {
    let mut out = String::new();
    let ranges = [('α', 'ω'), ('Α', 'Ρ'), ('Σ', 'Ω'), ('0', '9')];
    for (a, b) in ranges {
        for c in a..=b {
            out.push(c);
            out.push('\n');
        }
    }
    for c in ['.', ',', ';', '·', '!', '?', '«', '»', '(', ')', '-', '\''] {
        out.push(c);
        out.push('\n');
    }
    out
}

fn rows_of(prompt: &str) -> Vec<RefineRow> {
    let Some((_, rest)) = prompt.split_once("Rows (JSONL):\n") else { return Vec::new() };
    rest.lines().take_while(|l| !l.is_empty()).filter_map(|l| serde_json::from_str(l).ok()).collect()
}

fn row_number(row: &RefineRow) -> usize {
    row.id.trim_start_matches("row-").parse().unwrap_or(0)
}

fn edit(row: &RefineRow, op: EditOp, side: Side, indices: Vec<usize>) -> RefineEdit {
    RefineEdit { row_id: row.id.clone(), op, side, indices, split_points: Vec::new(), note: String::new(), text: None }
}

/// Deterministic stand-in for the model: a fixed mix of sound, flagged and
/// corrupting edits chosen by row number.
pub struct SimulatedEditor;

impl RefineTransport for SimulatedEditor {
    fn complete(&self, prompt: &str) -> Result<String, TransportError> {
        let rows = rows_of(prompt);
        let first = rows.first().map(row_number).unwrap_or(0);
        if first == 20 {
            return Ok("All rows look well aligned to me.".into());
        }
        let mut edits = Vec::new();
        for row in &rows {
            let i = row_number(row);
            let n = row.grc.len();
            match i % 7 {
                0 if n >= 2 => {
                    edits.push(edit(row, EditOp::Merge, Side::Grc, vec![0, 1]));
                    edits.push(edit(row, EditOp::Merge, Side::Ell, vec![0, 1]));
                }
                2 => {
                    let mut e = edit(row, EditOp::Flag, Side::Ell, Vec::new());
                    e.note = "possible omission".into();
                    edits.push(e);
                }
                // 1 proposes the true pieces, 4 an altered second piece.
                1 | 4 => {
                    let sentence = &row.ell[0];
                    if let Some(at) = sentence.chars().position(|c| c == ' ').filter(|&p| p > 0) {
                        let chars: Vec<char> = sentence.chars().collect();
                        let mut e = edit(row, EditOp::Split, Side::Ell, vec![0]);
                        e.split_points = vec![at];
                        let head: String = chars[..at].iter().collect();
                        let tail: String = chars[at..].iter().collect::<String>().trim().to_string();
                        let tail = if i % 7 == 4 { format!("{tail} ἔτι") } else { tail };
                        e.text = Some(vec![head, tail]);
                        edits.push(e);
                    }
                }
                5 if n >= 2 => {
                    let mut order: Vec<usize> = (0..n).collect();
                    order.swap(0, 1);
                    edits.push(edit(row, EditOp::Reorder, Side::Ell, order));
                }
                6 if n >= 3 => edits.push(edit(row, EditOp::Merge, Side::Grc, vec![0, 2])),
                _ => {}
            }
        }
        let body = serde_json::to_string_pretty(&edits).expect("edits serialize");
        Ok(if first.is_multiple_of(40) { format!("```json\n{body}\n```") } else { body })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error(transparent)]
    File(#[from] FileError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Run(#[from] RunError),
}

/// Writes the corpus, vocabulary and configuration to `dir`, runs the
/// pipeline against [`SimulatedEditor`] in a scratch work directory and saves
/// the recorded responses as the replay file.
pub fn write_fixture(dir: &Path, scratch: &Path) -> Result<(), FixtureError> {
    write_documents(&dir.join(DOCUMENTS), &synth_documents(7))?;
    write_atomic(&dir.join(BASE_VOCAB), basic_greek_vocab().as_bytes())?;
    write_atomic(&dir.join(CONFIG), PIPELINE_TOML.as_bytes())?;
    write_atomic(&dir.join(REPLAY), b"")?;
    let cfg = PipelineConfig::load(&dir.join(CONFIG))?;
    let recorder = RecordingTransport::new(SimulatedEditor);
    Pipeline::new(&cfg)
        .with_transport(&recorder)
        .with_workdir(scratch.to_path_buf())
        .run(RunOptions { force: true })?;
    recorder.write(&dir.join(REPLAY))?;
    Ok(())
}
