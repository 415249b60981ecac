//! Corpus statistics and the data card built from them.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::model::{Dialect, ExcerptKey, SentencePair, Split};

/// Whitespace-separated items.
pub fn count_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("corpus has no sentence pairs")]
    Empty,
    #[error("pair {0:?} has no split assignment")]
    Unassigned(String),
    #[error("split assignment names unknown pair {0:?}")]
    UnknownPair(String),
    #[error("inconsistent totals: {0}")]
    Inconsistent(&'static str),
}

/// Excerpt rows and sentence pairs of one dialect within a split.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowsPairs {
    pub rows: usize,
    pub pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    /// Sentence pairs (rows of the sentence-level corpus).
    pub sentences: usize,
    pub tokens_grc: usize,
    pub tokens_ell: usize,
    pub avg_tokens_grc: f64,
    pub avg_tokens_ell: f64,
    pub dialect_counts: BTreeMap<Dialect, usize>,
    pub split_counts: BTreeMap<Split, usize>,
    /// Per split and dialect, when pairs are available.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub split_dialects: BTreeMap<Split, BTreeMap<Dialect, RowsPairs>>,
}

impl CorpusStats {
    /// Stats from published totals; averages are derived.
    pub fn from_totals(
        sentences: usize,
        tokens_grc: usize,
        tokens_ell: usize,
        dialect_counts: BTreeMap<Dialect, usize>,
        split_counts: BTreeMap<Split, usize>,
    ) -> Result<Self, StatsError> {
        if sentences == 0 {
            return Err(StatsError::Empty);
        }
        let s = CorpusStats {
            sentences,
            tokens_grc,
            tokens_ell,
            avg_tokens_grc: tokens_grc as f64 / sentences as f64,
            avg_tokens_ell: tokens_ell as f64 / sentences as f64,
            dialect_counts,
            split_counts,
            split_dialects: BTreeMap::new(),
        };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<(), StatsError> {
        if self.dialect_counts.values().sum::<usize>() != self.sentences {
            return Err(StatsError::Inconsistent("dialect counts do not sum to the sentence total"));
        }
        if !self.split_counts.is_empty() && self.split_counts.values().sum::<usize>() != self.sentences {
            return Err(StatsError::Inconsistent("split counts do not sum to the sentence total"));
        }
        Ok(())
    }

    pub fn avg_grc_display(&self) -> String {
        fixed2(self.tokens_grc as u128, self.sentences as u128)
    }

    pub fn avg_ell_display(&self) -> String {
        fixed2(self.tokens_ell as u128, self.sentences as u128)
    }

    /// Modern over Ancient token count, two decimals.
    pub fn token_ratio_display(&self) -> Option<String> {
        (self.tokens_grc > 0).then(|| fixed2(self.tokens_ell as u128, self.tokens_grc as u128))
    }
}

/// `num / den` rounded half-up to two decimals, computed exactly.
pub fn fixed2(num: u128, den: u128) -> String {
    let hundredths = (num * 200 + den) / (2 * den);
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

/// `1234567` as `1,234,567`.
pub fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Aggregates `pairs`. An empty `splits` map means no split assignment;
/// otherwise every pair must be assigned.
pub fn compute_stats(pairs: &[SentencePair], splits: &BTreeMap<String, Split>) -> Result<CorpusStats, StatsError> {
    if pairs.is_empty() {
        return Err(StatsError::Empty);
    }
    let ids: BTreeSet<&str> = pairs.iter().map(|p| p.id.as_str()).collect();
    if let Some(unknown) = splits.keys().find(|k| !ids.contains(k.as_str())) {
        return Err(StatsError::UnknownPair(unknown.clone()));
    }
    let (mut tokens_grc, mut tokens_ell) = (0, 0);
    let mut dialect_counts = BTreeMap::new();
    let mut split_counts = BTreeMap::new();
    let mut rows: BTreeMap<(Split, Dialect), BTreeSet<ExcerptKey>> = BTreeMap::new();
    let mut split_dialects: BTreeMap<Split, BTreeMap<Dialect, RowsPairs>> = BTreeMap::new();
    for p in pairs {
        tokens_grc += count_tokens(&p.grc);
        tokens_ell += count_tokens(&p.ell);
        *dialect_counts.entry(p.meta.dialect).or_insert(0) += 1;
        if splits.is_empty() {
            continue;
        }
        let split = *splits.get(&p.id).ok_or_else(|| StatsError::Unassigned(p.id.clone()))?;
        *split_counts.entry(split).or_insert(0) += 1;
        split_dialects.entry(split).or_default().entry(p.meta.dialect).or_default().pairs += 1;
        rows.entry((split, p.meta.dialect)).or_default().insert(p.meta.excerpt_key());
    }
    for ((split, dialect), keys) in rows {
        split_dialects.get_mut(&split).and_then(|m| m.get_mut(&dialect)).expect("counted above").rows = keys.len();
    }
    let mut s = CorpusStats::from_totals(pairs.len(), tokens_grc, tokens_ell, dialect_counts, split_counts)?;
    s.split_dialects = split_dialects;
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplayValues {
    pub avg_tokens_grc: String,
    pub avg_tokens_ell: String,
    pub token_ratio: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataCardJson {
    pub stats: CorpusStats,
    pub display: DisplayValues,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataCard {
    pub text: String,
    pub json: DataCardJson,
}

impl DataCard {
    pub fn json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.json).expect("data card serializes");
        s.push('\n');
        s
    }
}

fn table(out: &mut String, header: [&str; 3], rows: &[[String; 3]]) {
    let mut all: Vec<[String; 3]> = Vec::with_capacity(rows.len() + 1);
    all.push(header.map(String::from));
    all.extend(rows.iter().cloned());
    let widths: Vec<usize> = (0..3).map(|c| all.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    let used = if header[2].is_empty() { 2 } else { 3 };
    for r in &all {
        let mut line = String::new();
        for c in 0..used {
            let pad = widths[c] - r[c].chars().count();
            if c == 0 {
                line.push_str(&r[c]);
                line.extend(core::iter::repeat_n(' ', pad));
            } else {
                line.push_str("  ");
                line.extend(core::iter::repeat_n(' ', pad));
                line.push_str(&r[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
}

pub fn render_data_card(stats: &CorpusStats) -> DataCard {
    let display = DisplayValues {
        avg_tokens_grc: stats.avg_grc_display(),
        avg_tokens_ell: stats.avg_ell_display(),
        token_ratio: stats.token_ratio_display(),
    };
    let mut t = String::from("Corpus data card\n\n");
    t.push_str("Sentence and token statistics\n");
    table(
        &mut t,
        ["", "Ancient Greek", "Modern Greek"],
        &[
            ["Sentences".into(), thousands(stats.sentences), thousands(stats.sentences)],
            ["Tokens / Words".into(), thousands(stats.tokens_grc), thousands(stats.tokens_ell)],
            ["Avg. tokens per sent.".into(), display.avg_tokens_grc.clone(), display.avg_tokens_ell.clone()],
        ],
    );
    let ratio = display.token_ratio.clone().unwrap_or_else(|| "n/a".into());
    let _ = writeln!(t, "MG/AG token ratio: {ratio}");

    t.push_str("\nSplits\n");
    if stats.split_counts.is_empty() {
        t.push_str("No split assignment was provided; split table omitted.\n");
    } else {
        let mut rows: Vec<[String; 3]> =
            stats.split_counts.iter().map(|(s, n)| [s.as_str().into(), thousands(*n), String::new()]).collect();
        rows.push(["Total".into(), thousands(stats.split_counts.values().sum()), String::new()]);
        table(&mut t, ["Split", "Sentence Pairs", ""], &rows);
    }

    t.push_str("\nDialects\n");
    let mut rows: Vec<[String; 3]> =
        stats.dialect_counts.iter().map(|(d, n)| [d.label().into(), thousands(*n), String::new()]).collect();
    rows.push(["Total".into(), thousands(stats.dialect_counts.values().sum()), String::new()]);
    table(&mut t, ["Ancient Greek Dialect", "Sentences", ""], &rows);

    for (split, dialects) in &stats.split_dialects {
        let _ = writeln!(t, "\nDialects in {split}");
        let mut rows: Vec<[String; 3]> =
            dialects.iter().map(|(d, c)| [d.label().into(), thousands(c.rows), thousands(c.pairs)]).collect();
        rows.push([
            "Total".into(),
            thousands(dialects.values().map(|c| c.rows).sum()),
            thousands(dialects.values().map(|c| c.pairs).sum()),
        ]);
        table(&mut t, ["Dialect", "Rows", "Pairs"], &rows);
    }
    DataCard { text: t, json: DataCardJson { stats: stats.clone(), display } }
}
