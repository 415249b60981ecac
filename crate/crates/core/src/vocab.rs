//! Character-level tokenizer vocabulary adaptation: find characters no piece
//! covers, add them, and plan embedding initialization from their base letters.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::normalize::strip_diacritics;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum VocabError {
    #[error("line {line}: empty piece")]
    EmptyPiece { line: usize },
    #[error("token {token:?} appears twice")]
    DuplicateToken { token: String },
    #[error("token ids are not dense: id {0} is missing")]
    SparseIds(usize),
    #[error("id {id} is used by more than one token")]
    DuplicateId { id: usize },
    #[error("invalid vocabulary JSON: {0}")]
    Json(String),
    #[error("invalid plan line {line}: {message}")]
    Plan { line: usize, message: String },
}

/// Tokens with dense ids `0..len`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: BTreeMap<String, usize>,
}

impl Vocabulary {
    pub fn from_tokens<I: IntoIterator<Item = S>, S: Into<String>>(tokens: I) -> Result<Self, VocabError> {
        let mut v = Vocabulary::default();
        for t in tokens {
            let t = t.into();
            if v.ids.contains_key(&t) {
                return Err(VocabError::DuplicateToken { token: t });
            }
            v.push(t);
        }
        Ok(v)
    }

    /// Plain piece list: one token per line (first tab-separated column), line number = id.
    pub fn from_piece_list(text: &str) -> Result<Self, VocabError> {
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        let mut tokens = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let token = line.split('\t').next().unwrap_or("");
            if token.is_empty() {
                return Err(VocabError::EmptyPiece { line: i + 1 });
            }
            tokens.push(token);
        }
        Vocabulary::from_tokens(tokens)
    }

    /// JSON object mapping token to id.
    pub fn from_json_map(json: &str) -> Result<Self, VocabError> {
        let map: BTreeMap<String, usize> = serde_json::from_str(json).map_err(|e| VocabError::Json(e.to_string()))?;
        let n = map.len();
        let mut by_id: BTreeMap<usize, String> = BTreeMap::new();
        for (token, id) in map {
            if by_id.insert(id, token).is_some() {
                return Err(VocabError::DuplicateId { id });
            }
        }
        if let Some(gap) = (0..n).find(|i| !by_id.contains_key(i)) {
            return Err(VocabError::SparseIds(gap));
        }
        let tokens: Vec<String> = by_id.into_values().collect();
        Vocabulary::from_tokens(tokens)
    }

    pub fn to_piece_list(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    fn push(&mut self, token: String) -> usize {
        let id = self.tokens.len();
        self.ids.insert(token.clone(), id);
        self.tokens.push(token);
        id
    }

    /// Every character occurring in some token.
    pub fn covered_chars(&self) -> BTreeSet<char> {
        self.tokens.iter().flat_map(|t| t.chars()).collect()
    }
}

/// Characters the vocabulary cannot encode, with occurrence counts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingReport {
    /// Sorted by code point.
    pub chars: Vec<char>,
    pub counts: BTreeMap<char, usize>,
}

/// Scans `corpus` for characters that appear in no vocabulary token.
/// Whitespace and control characters are not tokens and are skipped.
pub fn discover_missing<'a>(corpus: impl IntoIterator<Item = &'a str>, vocab: &Vocabulary) -> MissingReport {
    let covered = vocab.covered_chars();
    let mut counts: BTreeMap<char, usize> = BTreeMap::new();
    for text in corpus {
        for c in text.chars() {
            if c.is_whitespace() || c.is_control() || covered.contains(&c) {
                continue;
            }
            *counts.entry(c).or_default() += 1;
        }
    }
    MissingReport { chars: counts.keys().copied().collect(), counts }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub new_token: String,
    pub new_id: usize,
    pub source_token: String,
    pub source_id: usize,
}

/// New tokens and the existing tokens whose embeddings initialize them.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransplantPlan {
    pub entries: Vec<PlanEntry>,
    /// Missing characters with no base token; they are not added.
    pub unresolved: Vec<String>,
}

/// Base token for `c`: its diacritic-stripped form, else the lowercase of that.
pub fn resolve_base(c: char, vocab: &Vocabulary) -> Option<(String, usize)> {
    let stripped = strip_diacritics(c).to_string();
    if let Some(id) = vocab.id(&stripped) {
        return Some((stripped, id));
    }
    let lower = stripped.to_lowercase();
    vocab.id(&lower).map(|id| (lower, id))
}

/// Appends every resolvable missing character with the next free id.
pub fn extend_vocab(vocab: &Vocabulary, missing: &[char]) -> (Vocabulary, TransplantPlan) {
    let mut extended = vocab.clone();
    let mut plan = TransplantPlan::default();
    for &c in missing {
        let token = c.to_string();
        if extended.id(&token).is_some() {
            continue;
        }
        match resolve_base(c, vocab) {
            Some((source_token, source_id)) => {
                let new_id = extended.push(token.clone());
                plan.entries.push(PlanEntry { new_token: token, new_id, source_token, source_id });
            }
            None => plan.unresolved.push(token),
        }
    }
    (extended, plan)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub entries: usize,
    pub unresolved: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct SummaryLine {
    summary: PlanSummary,
}

impl TransplantPlan {
    /// JSONL: one entry per line, then a `{"summary": ...}` line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("plan entries serialize"));
            out.push('\n');
        }
        let summary = SummaryLine { summary: PlanSummary { entries: self.entries.len(), unresolved: self.unresolved.clone() } };
        out.push_str(&serde_json::to_string(&summary).expect("summary serializes"));
        out.push('\n');
        out
    }

    pub fn from_jsonl(text: &str) -> Result<(Self, PlanSummary), VocabError> {
        let mut plan = TransplantPlan::default();
        let mut summary = None;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let err = |message: String| VocabError::Plan { line: i + 1, message };
            if summary.is_some() {
                return Err(err("record after the summary line".into()));
            }
            if line.trim_start().starts_with("{\"summary\"") {
                let s: SummaryLine = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
                summary = Some(s.summary);
            } else {
                plan.entries.push(serde_json::from_str(line).map_err(|e| err(e.to_string()))?);
            }
        }
        let summary = summary.ok_or(VocabError::Plan { line: 0, message: "missing summary line".into() })?;
        if summary.entries != plan.entries.len() {
            return Err(VocabError::Plan { line: 0, message: "summary count disagrees with entries".into() });
        }
        plan.unresolved = summary.unresolved.clone();
        Ok((plan, summary))
    }
}
