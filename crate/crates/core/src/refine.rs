//! LLM edit protocol: prompt construction, tolerant response parsing and a
//! validator that only lets merge/split/reorder edits through when they leave
//! each side's text unchanged.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{BlockSpan, SentencePair, Side};
use crate::normalize::collapse_whitespace;

/// Fixed opening instruction of every refinement prompt.
pub const SYSTEM_INSTRUCTION: &str = "You are a cautious data editor. Your job is to fix alignment errors between Ancient Greek (“grc”) and Modern Greek (“ell”) sentences inside a JSONL file. Do not translate or paraphrase any text. Only merge/split and reorder within a row while keeping the original order of sentences.";

/// Default response-format contract appended after the rows.
pub const RESPONSE_CONTRACT: &str = "Answer with a JSON array of edit records and nothing else. Each record is an object with the keys \"row_id\", \"op\" (one of \"merge\", \"split\", \"reorder\", \"flag\"), \"side\" (\"grc\" or \"ell\"), \"indices\" (0-based sentence positions in that side), \"split_points\" (character offsets inside the sentence, split only) and \"note\". A merge lists at least two adjacent indices. A reorder lists every index of the side in its new order. Use \"flag\" for a misalignment you cannot fix with these operations. Answer [] when every row is aligned correctly.";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineRow {
    pub id: String,
    pub grc: Vec<String>,
    pub ell: Vec<String>,
}

impl RefineRow {
    pub fn side(&self, side: Side) -> &[String] {
        match side {
            Side::Grc => &self.grc,
            Side::Ell => &self.ell,
        }
    }

    fn side_mut(&mut self, side: Side) -> &mut Vec<String> {
        match side {
            Side::Grc => &mut self.grc,
            Side::Ell => &mut self.ell,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditOp {
    Merge,
    Split,
    Reorder,
    Flag,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineEdit {
    pub row_id: String,
    pub op: EditOp,
    pub side: Side,
    #[serde(default)]
    pub indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub split_points: Vec<usize>,
    #[serde(default)]
    pub note: String,
    /// Resulting sentences as proposed by the model, if it sent them. They must
    /// agree with the mechanical result of the edit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Rejection {
    #[error("edit targets row {found:?}, not {expected:?}")]
    WrongRow { expected: String, found: String },
    #[error("index {index} out of range for {len} sentences")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("merge needs at least two adjacent indices in ascending order")]
    BadMerge,
    #[error("split needs one index and strictly increasing interior offsets that leave no empty piece")]
    BadSplit,
    #[error("reorder indices must be a permutation of the side")]
    BadReorder,
    #[error("proposed text does not match the edit")]
    TextMismatch,
    #[error("edit changes the text of the side")]
    TextChanged,
    #[error("edit changes the multiset of sentences")]
    MultisetChanged,
    #[error("edit changes the order of sentences")]
    OrderChanged,
}

/// Whitespace-collapsed single-space concatenation of a side.
pub fn side_text(sentences: &[String]) -> String {
    collapse_whitespace(&sentences.join(" "))
}

fn sorted(sentences: &[String]) -> Vec<String> {
    let mut v: Vec<String> = sentences.iter().map(|s| collapse_whitespace(s)).collect();
    v.sort();
    v
}

/// Rewrites one side according to `edit`, tracking for every resulting
/// sentence the set of original row positions it came from.
fn rewrite(
    sentences: &[String],
    origins: &[BTreeSet<usize>],
    edit: &RefineEdit,
) -> Result<(Vec<String>, Vec<BTreeSet<usize>>), Rejection> {
    let len = sentences.len();
    if let Some(&index) = edit.indices.iter().find(|&&i| i >= len) {
        return Err(Rejection::IndexOutOfRange { index, len });
    }
    let mut out = sentences.to_vec();
    let mut out_origins = origins.to_vec();
    let changed: Range<usize>;
    match edit.op {
        EditOp::Flag => return Ok((out, out_origins)),
        EditOp::Merge => {
            let idx = &edit.indices;
            if idx.len() < 2 || idx.windows(2).any(|w| w[1] != w[0] + 1) {
                return Err(Rejection::BadMerge);
            }
            let (first, last) = (idx[0], idx[idx.len() - 1]);
            let joined = sentences[first..=last].join(" ");
            let merged_origins = origins[first..=last].iter().flatten().copied().collect();
            out.splice(first..=last, [joined]);
            out_origins.splice(first..=last, [merged_origins]);
            changed = first..first + 1;
        }
        EditOp::Split => {
            if edit.indices.len() != 1 {
                return Err(Rejection::BadSplit);
            }
            let at = edit.indices[0];
            let chars: Vec<char> = sentences[at].chars().collect();
            let points = &edit.split_points;
            let interior = points.iter().all(|&p| p > 0 && p < chars.len());
            if points.is_empty() || !interior || points.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Rejection::BadSplit);
            }
            let mut bounds = Vec::with_capacity(points.len() + 2);
            bounds.push(0);
            bounds.extend_from_slice(points);
            bounds.push(chars.len());
            let pieces: Vec<String> = bounds
                .windows(2)
                .map(|w| chars[w[0]..w[1]].iter().collect::<String>().trim().to_string())
                .collect();
            if pieces.iter().any(String::is_empty) {
                return Err(Rejection::BadSplit);
            }
            let n = pieces.len();
            let o = origins[at].clone();
            out.splice(at..=at, pieces);
            out_origins.splice(at..=at, core::iter::repeat_n(o, n));
            changed = at..at + n;
        }
        EditOp::Reorder => {
            let mut seen = alloc::vec![false; len];
            if edit.indices.len() != len {
                return Err(Rejection::BadReorder);
            }
            for &i in &edit.indices {
                if core::mem::replace(&mut seen[i], true) {
                    return Err(Rejection::BadReorder);
                }
            }
            out = edit.indices.iter().map(|&i| sentences[i].clone()).collect();
            out_origins = edit.indices.iter().map(|&i| origins[i].clone()).collect();
            if sorted(&out) != sorted(sentences) {
                return Err(Rejection::MultisetChanged);
            }
            let collapsed = |v: &[String]| v.iter().map(|s| collapse_whitespace(s)).collect::<Vec<_>>();
            if collapsed(&out) != collapsed(sentences) {
                return Err(Rejection::OrderChanged);
            }
            changed = 0..len;
        }
    }
    if let Some(proposed) = &edit.text {
        let computed: Vec<String> = out[changed.clone()].iter().map(|s| collapse_whitespace(s)).collect();
        let proposed: Vec<String> = proposed.iter().map(|s| collapse_whitespace(s)).collect();
        if proposed != computed {
            return Err(Rejection::TextMismatch);
        }
    }
    if side_text(&out) != side_text(sentences) {
        return Err(Rejection::TextChanged);
    }
    Ok((out, out_origins))
}

/// The row after validated edits, plus what happened to each edit.
#[derive(Clone, Debug, PartialEq)]
pub struct AppliedEdits {
    pub row: RefineRow,
    pub accepted: Vec<RefineEdit>,
    pub rejected: Vec<(RefineEdit, Rejection)>,
    /// Original row positions behind each resulting grc sentence.
    pub grc_origins: Vec<BTreeSet<usize>>,
    /// Original row positions behind each resulting ell sentence.
    pub ell_origins: Vec<BTreeSet<usize>>,
}

impl AppliedEdits {
    pub fn flagged(&self) -> bool {
        self.accepted.iter().any(|e| e.op == EditOp::Flag)
    }
}

/// Applies `edits` in order. Indices of each edit refer to the row as left by
/// the edits accepted before it. A rejected edit leaves the row untouched.
pub fn apply_edits(row: &RefineRow, edits: &[RefineEdit]) -> AppliedEdits {
    let singleton = |n: usize| (0..n).map(|i| BTreeSet::from([i])).collect::<Vec<_>>();
    let mut out = AppliedEdits {
        row: row.clone(),
        accepted: Vec::new(),
        rejected: Vec::new(),
        grc_origins: singleton(row.grc.len()),
        ell_origins: singleton(row.ell.len()),
    };
    for edit in edits {
        if edit.row_id != row.id {
            let why = Rejection::WrongRow { expected: row.id.clone(), found: edit.row_id.clone() };
            out.rejected.push((edit.clone(), why));
            continue;
        }
        let origins = match edit.side {
            Side::Grc => &out.grc_origins,
            Side::Ell => &out.ell_origins,
        };
        match rewrite(out.row.side(edit.side), origins, edit) {
            Ok((sentences, origins)) => {
                *out.row.side_mut(edit.side) = sentences;
                match edit.side {
                    Side::Grc => out.grc_origins = origins,
                    Side::Ell => out.ell_origins = origins,
                }
                out.accepted.push(edit.clone());
            }
            Err(why) => out.rejected.push((edit.clone(), why)),
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptConfig {
    /// Extra guidance placed between the fixed instruction and the rows.
    pub preamble: String,
    pub response_contract: String,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig { preamble: String::new(), response_contract: String::from(RESPONSE_CONTRACT) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RefineError {
    #[error("refinement batch is empty")]
    EmptyBatch,
    #[error("no edit records in response ({malformed} malformed): {raw:?}")]
    Unparseable { raw: String, malformed: usize },
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// Prompt for one batch: instruction, optional preamble, rows as JSONL, contract.
pub fn build_prompt(rows: &[RefineRow], cfg: &PromptConfig) -> Result<String, RefineError> {
    if rows.is_empty() {
        return Err(RefineError::EmptyBatch);
    }
    let mut prompt = String::from(SYSTEM_INSTRUCTION);
    prompt.push_str("\n\n");
    if !cfg.preamble.trim().is_empty() {
        prompt.push_str(cfg.preamble.trim());
        prompt.push_str("\n\n");
    }
    prompt.push_str("Rows (JSONL):\n");
    for row in rows {
        prompt.push_str(&serde_json::to_string(row).expect("rows serialize"));
        prompt.push('\n');
    }
    prompt.push('\n');
    prompt.push_str(&cfg.response_contract);
    prompt.push('\n');
    Ok(prompt)
}

/// Edit records found in a response and the records that failed to decode.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParsedEdits {
    pub edits: Vec<RefineEdit>,
    pub malformed: Vec<(String, String)>,
}

fn collect_records(value: Value, out: &mut Vec<Value>) -> bool {
    match value {
        Value::Array(items) => {
            out.extend(items);
            true
        }
        Value::Object(mut map) => {
            if let Some(Value::Array(items)) = map.remove("edits") {
                out.extend(items);
            } else {
                out.push(Value::Object(map));
            }
            true
        }
        _ => false,
    }
}

/// Extracts edit records from a model response. Code fences and surrounding
/// prose are ignored. An empty JSON array means "no edits".
pub fn parse_edits(response: &str) -> Result<ParsedEdits, RefineError> {
    let body: String = response
        .lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n");
    let body = body.trim();
    let mut records = Vec::new();
    let mut found_json = false;
    if let Ok(v) = serde_json::from_str::<Value>(body) {
        found_json = collect_records(v, &mut records);
    }
    if !found_json {
        for line in body.lines() {
            let line = line.trim().trim_end_matches(',');
            if line.starts_with('{') || line.starts_with('[') {
                if let Ok(v) = serde_json::from_str::<Value>(line) {
                    found_json |= collect_records(v, &mut records);
                }
            }
        }
    }
    if !found_json {
        if let (Some(a), Some(b)) = (body.find('['), body.rfind(']')) {
            if a < b {
                if let Ok(v) = serde_json::from_str::<Value>(&body[a..=b]) {
                    found_json = collect_records(v, &mut records);
                }
            }
        }
    }
    let mut parsed = ParsedEdits::default();
    for record in records {
        match serde_json::from_value::<RefineEdit>(record.clone()) {
            Ok(edit) => parsed.edits.push(edit),
            Err(e) => parsed.malformed.push((record.to_string(), e.to_string())),
        }
    }
    if !found_json || (parsed.edits.is_empty() && !parsed.malformed.is_empty()) {
        return Err(RefineError::Unparseable { raw: response.to_string(), malformed: parsed.malformed.len() });
    }
    Ok(parsed)
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("no recorded response for prompt sha256 {0}")]
    MissingFixture(String),
    #[error("request failed with HTTP status {0}")]
    Status(u16),
    #[error("request timed out")]
    Timeout,
    #[error("giving up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("transport error: {0}")]
    Other(String),
}

/// Something that turns a prompt into a model response.
pub trait RefineTransport {
    fn complete(&self, prompt: &str) -> Result<String, TransportError>;
}

impl<T: RefineTransport + ?Sized> RefineTransport for &T {
    fn complete(&self, prompt: &str) -> Result<String, TransportError> {
        (**self).complete(prompt)
    }
}

impl<T: RefineTransport + ?Sized> RefineTransport for alloc::boxed::Box<T> {
    fn complete(&self, prompt: &str) -> Result<String, TransportError> {
        (**self).complete(prompt)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    /// Consecutive pairs of one document per row.
    pub row_size: usize,
    /// Rows per model call.
    pub batch_size: usize,
    pub prompt: PromptConfig,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig { row_size: 8, batch_size: 20, prompt: PromptConfig::default() }
    }
}

/// A row and the pairs it was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct RowPlan {
    pub row: RefineRow,
    pub pairs: Range<usize>,
}

/// Groups consecutive pairs of the same excerpt into rows of at most `row_size`.
pub fn plan_rows(pairs: &[SentencePair], row_size: usize) -> Vec<RowPlan> {
    let row_size = row_size.max(1);
    let mut plans = Vec::new();
    let mut start = 0;
    while start < pairs.len() {
        let key = pairs[start].meta.excerpt_key();
        let mut end = start + 1;
        while end < pairs.len() && end - start < row_size && pairs[end].meta.excerpt_key() == key {
            end += 1;
        }
        let slice = &pairs[start..end];
        plans.push(RowPlan {
            row: RefineRow {
                id: format!("row-{:05}", plans.len()),
                grc: slice.iter().map(|p| p.grc.clone()).collect(),
                ell: slice.iter().map(|p| p.ell.clone()).collect(),
            },
            pairs: start..end,
        });
        start = end;
    }
    plans
}

/// Review-file record for a row that needs a human look.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub row_id: String,
    pub pair_ids: Vec<String>,
    pub reason: String,
    pub grc: Vec<String>,
    pub ell: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rejected: Vec<Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Refined pairs of one row and its review record, if any.
#[derive(Clone, Debug, PartialEq)]
pub struct RowResult {
    pub pairs: Vec<SentencePair>,
    pub review: Option<ReviewRecord>,
    pub accepted: usize,
    pub rejected: usize,
}

fn union_span(spans: impl Iterator<Item = BlockSpan>) -> BlockSpan {
    let mut src = (usize::MAX, 0usize);
    let mut tgt = (usize::MAX, 0usize);
    for s in spans {
        src = (src.0.min(s.src_start), src.1.max(s.src_start + s.src_len));
        tgt = (tgt.0.min(s.tgt_start), tgt.1.max(s.tgt_start + s.tgt_len));
    }
    BlockSpan { src_start: src.0, src_len: src.1 - src.0, tgt_start: tgt.0, tgt_len: tgt.1 - tgt.0 }
}

fn review(plan: &RowPlan, pairs: &[SentencePair], reason: &str, applied: Option<&AppliedEdits>) -> ReviewRecord {
    let row = applied.map_or(&plan.row, |a| &a.row);
    ReviewRecord {
        row_id: plan.row.id.clone(),
        pair_ids: pairs[plan.pairs.clone()].iter().map(|p| p.id.clone()).collect(),
        reason: reason.to_string(),
        grc: row.grc.clone(),
        ell: row.ell.clone(),
        rejected: applied
            .map(|a| {
                a.rejected
                    .iter()
                    .map(|(e, why)| {
                        let mut v = serde_json::to_value(e).expect("edits serialize");
                        v["rejection"] = Value::String(why.to_string());
                        v
                    })
                    .collect()
            })
            .unwrap_or_default(),
        notes: applied
            .map(|a| a.accepted.iter().filter(|e| !e.note.is_empty()).map(|e| e.note.clone()).collect())
            .unwrap_or_default(),
    }
}

/// Turns the validated edits of one row back into pairs.
pub fn row_result(plan: &RowPlan, pairs: &[SentencePair], edits: &[RefineEdit]) -> RowResult {
    let originals = &pairs[plan.pairs.clone()];
    let applied = apply_edits(&plan.row, edits);
    let (accepted, rejected) = (applied.accepted.len(), applied.rejected.len());
    if applied.row.grc.len() != applied.row.ell.len() {
        let reason = "edits leave the row with unequal sentence counts";
        return RowResult {
            pairs: originals.to_vec(),
            review: Some(review(plan, pairs, reason, Some(&applied))),
            accepted,
            rejected,
        };
    }
    let mut out = Vec::with_capacity(applied.row.grc.len());
    let mut revised = 0;
    for (i, (grc, ell)) in applied.row.grc.iter().zip(&applied.row.ell).enumerate() {
        // Positional pairing: sentence i of each side forms pair i.
        let origins: BTreeSet<usize> = applied.grc_origins[i].union(&applied.ell_origins[i]).copied().collect();
        let first = &originals[*origins.first().expect("every sentence has an origin")];
        let unchanged = origins.len() == 1 && *grc == first.grc && *ell == first.ell;
        let mut pair = if unchanged {
            first.clone()
        } else {
            revised += 1;
            let mut p = first.clone();
            p.id = format!("{}~r{revised}", first.id);
            p.grc = grc.clone();
            p.ell = ell.clone();
            p.block = union_span(origins.iter().map(|&o| originals[o].block));
            p.score = origins.iter().map(|&o| originals[o].score).sum();
            p
        };
        pair.refined = rejected == 0 && !applied.flagged();
        out.push(pair);
    }
    let review = if rejected > 0 {
        Some(review(plan, pairs, "model proposed edits that failed validation", Some(&applied)))
    } else if applied.flagged() {
        Some(review(plan, pairs, "flagged by the model", Some(&applied)))
    } else {
        None
    };
    RowResult { pairs: out, review, accepted, rejected }
}

/// Refines one batch of rows with a single model call. An unparseable
/// response sends every row to review with its pairs unchanged.
pub fn refine_batch<T: RefineTransport + ?Sized>(
    plans: &[RowPlan],
    pairs: &[SentencePair],
    cfg: &RefineConfig,
    transport: &T,
) -> Result<Vec<RowResult>, RefineError> {
    let rows: Vec<RefineRow> = plans.iter().map(|p| p.row.clone()).collect();
    let prompt = build_prompt(&rows, &cfg.prompt)?;
    let response = transport.complete(&prompt)?;
    let parsed = match parse_edits(&response) {
        Ok(p) => p,
        Err(RefineError::Unparseable { .. }) => {
            return Ok(plans
                .iter()
                .map(|plan| RowResult {
                    pairs: pairs[plan.pairs.clone()].to_vec(),
                    review: Some(review(plan, pairs, "response contained no edit records", None)),
                    accepted: 0,
                    rejected: 0,
                })
                .collect());
        }
        Err(e) => return Err(e),
    };
    let ids: BTreeSet<&str> = plans.iter().map(|p| p.row.id.as_str()).collect();
    let stray = parsed.edits.iter().filter(|e| !ids.contains(e.row_id.as_str())).count();
    let mut results: Vec<RowResult> = plans
        .iter()
        .map(|plan| {
            let edits: Vec<RefineEdit> = parsed.edits.iter().filter(|e| e.row_id == plan.row.id).cloned().collect();
            row_result(plan, pairs, &edits)
        })
        .collect();
    if let Some(first) = results.first_mut() {
        first.rejected += stray + parsed.malformed.len();
    }
    Ok(results)
}

/// Outcome of refining a whole pair sequence.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RefineResult {
    pub pairs: Vec<SentencePair>,
    pub review: Vec<ReviewRecord>,
    pub accepted: usize,
    pub rejected: usize,
    pub calls: usize,
}

impl RefineResult {
    /// Appends batch results in order.
    pub fn extend(&mut self, results: Vec<RowResult>) {
        self.calls += 1;
        for r in results {
            self.pairs.extend(r.pairs);
            self.review.extend(r.review);
            self.accepted += r.accepted;
            self.rejected += r.rejected;
        }
    }
}

/// Sequential refinement of `pairs`; batches go to the transport one after another.
pub fn refine_pairs<T: RefineTransport + ?Sized>(
    pairs: &[SentencePair],
    cfg: &RefineConfig,
    transport: &T,
) -> Result<RefineResult, RefineError> {
    let plans = plan_rows(pairs, cfg.row_size);
    let mut result = RefineResult::default();
    for batch in plans.chunks(cfg.batch_size.max(1)) {
        result.extend(refine_batch(batch, pairs, cfg, transport)?);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dialect, ExtraFields, Metadata};
    use alloc::vec;

    fn row(grc: &[&str], ell: &[&str]) -> RefineRow {
        RefineRow {
            id: "r".into(),
            grc: grc.iter().map(|s| s.to_string()).collect(),
            ell: ell.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn edit(op: EditOp, side: Side, indices: &[usize]) -> RefineEdit {
        RefineEdit {
            row_id: "r".into(),
            op,
            side,
            indices: indices.to_vec(),
            split_points: vec![],
            note: String::new(),
            text: None,
        }
    }

    #[test]
    fn prompt_template() {
        let p = build_prompt(&[row(&["α.", "β.", "γ."], &["Α.", "Β."])], &PromptConfig::default()).unwrap();
        assert!(p.starts_with(SYSTEM_INSTRUCTION));
        assert!(p.contains("cautious data editor"));
        let line = p.lines().find(|l| l.starts_with('{')).unwrap();
        let back: RefineRow = serde_json::from_str(line).unwrap();
        assert_eq!((back.grc.len(), back.ell.len()), (3, 2));
        assert_eq!(build_prompt(&[], &PromptConfig::default()), Err(RefineError::EmptyBatch));
    }

    #[test]
    fn parse_tolerates_fences_and_prose() {
        let body = r#"[{"row_id":"r","op":"merge","side":"ell","indices":[1,2]},{"row_id":"r","op":"flag","side":"grc","note":"odd"}]"#;
        assert_eq!(parse_edits(body).unwrap().edits.len(), 2);
        let fenced = alloc::format!("Here you go:\n```json\n{body}\n```\nDone.");
        assert_eq!(parse_edits(&fenced).unwrap().edits, parse_edits(body).unwrap().edits);
        let lines = "{\"row_id\":\"r\",\"op\":\"flag\",\"side\":\"grc\"}\n{\"row_id\":\"r\",\"op\":\"merge\",\"side\":\"grc\",\"indices\":[0,1]}";
        assert_eq!(parse_edits(lines).unwrap().edits.len(), 2);
        assert!(matches!(parse_edits("All rows look fine to me."), Err(RefineError::Unparseable { .. })));
        assert!(parse_edits("[]").unwrap().edits.is_empty());
        let mixed = r#"[{"row_id":"r","op":"flag","side":"grc"},{"op":"explode"}]"#;
        let parsed = parse_edits(mixed).unwrap();
        assert_eq!((parsed.edits.len(), parsed.malformed.len()), (1, 1));
    }

    #[test]
    fn merge_joins_with_one_space() {
        let r = row(&["α.", "β.", "γ."], &["Α.", "Β", "Γ."]);
        let out = apply_edits(&r, &[edit(EditOp::Merge, Side::Ell, &[1, 2])]);
        assert_eq!(out.row.ell, vec!["Α.", "Β Γ."]);
        assert_eq!(side_text(&out.row.ell), side_text(&r.ell));
        assert_eq!(out.ell_origins[1], BTreeSet::from([1, 2]));
        assert!(out.rejected.is_empty());
    }

    #[test]
    fn dropping_a_word_is_rejected() {
        let r = row(&["ὁ λόγος ἐστίν."], &["Ο λόγος είναι."]);
        let mut e = edit(EditOp::Split, Side::Ell, &[0]);
        e.split_points = vec![8];
        e.text = Some(vec!["Ο λόγος".into(), ".".into()]);
        let out = apply_edits(&r, &[e]);
        assert_eq!(out.row, r);
        assert_eq!(out.rejected[0].1, Rejection::TextMismatch);
    }

    #[test]
    fn split_at_sentence_boundary() {
        let r = row(&["Ἦλθεν. Εἶδεν."], &["Ήρθε. Είδε."]);
        let mut e = edit(EditOp::Split, Side::Grc, &[0]);
        e.split_points = vec![6];
        let out = apply_edits(&r, &[e.clone()]);
        assert_eq!(out.row.grc, vec!["Ἦλθεν.", "Εἶδεν."]);
        e.split_points = vec![3];
        assert_eq!(apply_edits(&r, &[e]).rejected[0].1, Rejection::TextChanged);
    }

    #[test]
    fn reorder_must_keep_order() {
        let r = row(&["α.", "β."], &["Α.", "Α."]);
        let swap_distinct = apply_edits(&r, &[edit(EditOp::Reorder, Side::Grc, &[1, 0])]);
        assert_eq!(swap_distinct.rejected[0].1, Rejection::OrderChanged);
        // Same concatenated text, but the sentence boundary moves.
        let shifted = row(&["α α", "α"], &["Α."]);
        let out = apply_edits(&shifted, &[edit(EditOp::Reorder, Side::Grc, &[1, 0])]);
        assert_eq!(out.rejected[0].1, Rejection::OrderChanged);
        let swap_equal = apply_edits(&r, &[edit(EditOp::Reorder, Side::Ell, &[1, 0])]);
        assert!(swap_equal.rejected.is_empty());
        let bad = apply_edits(&r, &[edit(EditOp::Reorder, Side::Ell, &[0, 0])]);
        assert_eq!(bad.rejected[0].1, Rejection::BadReorder);
    }

    #[test]
    fn flag_and_range_checks() {
        let r = row(&["α."], &["Α."]);
        let out = apply_edits(&r, &[edit(EditOp::Flag, Side::Grc, &[])]);
        assert!(out.flagged());
        assert_eq!(out.row, r);
        let out = apply_edits(&r, &[edit(EditOp::Merge, Side::Grc, &[0, 1])]);
        assert_eq!(out.rejected[0].1, Rejection::IndexOutOfRange { index: 1, len: 1 });
        let mut other = edit(EditOp::Flag, Side::Grc, &[]);
        other.row_id = "x".into();
        assert!(matches!(apply_edits(&r, &[other]).rejected[0].1, Rejection::WrongRow { .. }));
    }

    fn pair(id: &str, grc: &str, ell: &str, i: usize) -> SentencePair {
        SentencePair {
            id: id.into(),
            grc: grc.into(),
            ell: ell.into(),
            meta: Metadata::new(Dialect::Attic),
            block: BlockSpan { src_start: i, src_len: 1, tgt_start: i, tgt_len: 1 },
            score: 0.25,
            refined: false,
            multi_reference: false,
            extra: ExtraFields::new(),
        }
    }

    struct Fixed(&'static str);
    impl RefineTransport for Fixed {
        fn complete(&self, _prompt: &str) -> Result<String, TransportError> {
            Ok(self.0.into())
        }
    }

    #[test]
    fn merging_both_sides_keeps_provenance() {
        let pairs = vec![pair("p0", "α.", "Α, μέρος", 0), pair("p1", "β.", "Β.", 1), pair("p2", "γ.", "Γ.", 2)];
        let t = Fixed(
            r#"[{"row_id":"row-00000","op":"merge","side":"grc","indices":[0,1]},{"row_id":"row-00000","op":"merge","side":"ell","indices":[0,1]}]"#,
        );
        let out = refine_pairs(&pairs, &RefineConfig::default(), &t).unwrap();
        assert_eq!(out.pairs.len(), 2);
        assert_eq!(out.pairs[0].id, "p0~r1");
        assert_eq!(out.pairs[0].grc, "α. β.");
        assert_eq!(out.pairs[0].block, BlockSpan { src_start: 0, src_len: 2, tgt_start: 0, tgt_len: 2 });
        assert_eq!(out.pairs[0].score, 0.5);
        assert_eq!(out.pairs[1], SentencePair { refined: true, ..pairs[2].clone() });
        assert!(out.review.is_empty());
    }

    #[test]
    fn unbalanced_rows_go_to_review() {
        let pairs = vec![pair("p0", "α.", "Α.", 0), pair("p1", "β.", "Β.", 1)];
        let t = Fixed(r#"[{"row_id":"row-00000","op":"merge","side":"grc","indices":[0,1]}]"#);
        let out = refine_pairs(&pairs, &RefineConfig::default(), &t).unwrap();
        assert_eq!(out.pairs, pairs);
        assert_eq!(out.review.len(), 1);
    }

    #[test]
    fn no_edits_is_identity_on_refined_pairs() {
        let mut pairs = vec![pair("p0", "α.", "Α.", 0), pair("p1", "β.", "Β.", 1)];
        pairs.iter_mut().for_each(|p| p.refined = true);
        let out = refine_pairs(&pairs, &RefineConfig::default(), &Fixed("[]")).unwrap();
        assert_eq!(out.pairs, pairs);
        let prose = refine_pairs(&pairs, &RefineConfig::default(), &Fixed("Looks good")).unwrap();
        assert_eq!(prose.pairs, pairs);
        assert_eq!(prose.review.len(), 1);
    }

    #[test]
    fn rows_respect_excerpts_and_size() {
        let mut pairs: Vec<SentencePair> = (0..5).map(|i| pair(&alloc::format!("p{i}"), "α.", "Α.", i)).collect();
        pairs[3].meta.segment_index = 1;
        pairs[4].meta.segment_index = 1;
        let plans = plan_rows(&pairs, 2);
        let ranges: Vec<_> = plans.iter().map(|p| p.pairs.clone()).collect();
        assert_eq!(ranges, vec![0..2, 2..3, 3..5]);
    }
}
