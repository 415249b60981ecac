//! Shared corpus data model.
//!
//! Every record type here is a plain value object. Field names follow the
//! JSONL interchange schema used for documents and aligned pairs; unknown
//! keys found in input records are kept in `extra` maps and written back
//! out unchanged.

use alloc::collections::BTreeMap;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Extra, unrecognised keys carried through (de)serialization.
pub type ExtraFields = BTreeMap<String, Value>;

/// Ancient Greek dialect of a source text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dialect {
    Attic,
    Ionic,
    Doric,
    HomericEpic,
    HellenisticKoine,
}

impl Dialect {
    pub const ALL: [Dialect; 5] = [
        Dialect::Attic,
        Dialect::Ionic,
        Dialect::Doric,
        Dialect::HomericEpic,
        Dialect::HellenisticKoine,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dialect::Attic => "Attic",
            Dialect::Ionic => "Ionic",
            Dialect::Doric => "Doric",
            Dialect::HomericEpic => "HomericEpic",
            Dialect::HellenisticKoine => "HellenisticKoine",
        }
    }

    /// Human-readable label used in data cards.
    pub fn label(self) -> &'static str {
        match self {
            Dialect::Attic => "Attic",
            Dialect::Ionic => "Ionic",
            Dialect::Doric => "Doric",
            Dialect::HomericEpic => "Homeric / Epic",
            Dialect::HellenisticKoine => "Hellenistic Koine",
        }
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown dialect {0:?}")]
pub struct UnknownDialect(pub String);

impl FromStr for Dialect {
    type Err = UnknownDialect;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dialect::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| UnknownDialect(s.into()))
    }
}

/// Corpus split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
    Stress,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Dev, Split::Test, Split::Stress];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
            Split::Stress => "stress",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which language side of the bitext a text belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Ancient Greek source.
    Grc,
    /// Modern Greek translation.
    Ell,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Grc => "grc",
            Side::Ell => "ell",
        }
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grc" => Ok(Side::Grc),
            "ell" => Ok(Side::Ell),
            other => Err(alloc::format!("unknown side {other:?} (expected grc or ell)")),
        }
    }
}

/// Provenance metadata of an excerpt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default)]
    pub author: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub segment_index: u64,
    #[serde(default)]
    pub url: String,
    #[serde(default)]
    pub translator: String,
    pub dialect: Dialect,
    #[serde(default)]
    pub genre: String,
    #[serde(default)]
    pub era: String,
    #[serde(flatten)]
    pub extra: ExtraFields,
}

impl Metadata {
    pub fn new(dialect: Dialect) -> Self {
        Metadata {
            author: String::new(),
            title: String::new(),
            segment_index: 0,
            url: String::new(),
            translator: String::new(),
            dialect,
            genre: String::new(),
            era: String::new(),
            extra: ExtraFields::new(),
        }
    }

    /// Key identifying the excerpt a record came from.
    pub fn excerpt_key(&self) -> ExcerptKey {
        ExcerptKey {
            author: self.author.clone(),
            title: self.title.clone(),
            segment_index: self.segment_index,
        }
    }
}

/// (author, title, segment index): records sharing it form one excerpt group.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExcerptKey {
    pub author: String,
    pub title: String,
    pub segment_index: u64,
}

/// One excerpt-level bilingual record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(rename = "grc")]
    pub grc_text: String,
    #[serde(rename = "ell")]
    pub ell_text: String,
    pub meta: Metadata,
    /// Verse-indexed sources that arrive already sentence-aligned.
    #[serde(default, skip_serializing_if = "is_false")]
    pub prealigned: bool,
    #[serde(flatten)]
    pub extra: ExtraFields,
}

/// Index ranges of an aligned block, as stored on a pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockSpan {
    pub src_start: usize,
    pub src_len: usize,
    pub tgt_start: usize,
    pub tgt_len: usize,
}

/// A monotone correspondence between a source and a target sentence range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentBlock {
    pub src_start: usize,
    pub src_len: usize,
    pub tgt_start: usize,
    pub tgt_len: usize,
    pub cost: f64,
}

impl AlignmentBlock {
    pub fn span(&self) -> BlockSpan {
        BlockSpan {
            src_start: self.src_start,
            src_len: self.src_len,
            tgt_start: self.tgt_start,
            tgt_len: self.tgt_len,
        }
    }

    /// `(src_len, tgt_len)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.src_len, self.tgt_len)
    }

    /// A block with one empty side.
    pub fn is_skip(&self) -> bool {
        self.src_len == 0 || self.tgt_len == 0
    }
}

/// One aligned AG-MG unit. Either side may hold several sentences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentencePair {
    pub id: String,
    pub grc: String,
    pub ell: String,
    pub meta: Metadata,
    pub block: BlockSpan,
    pub score: f64,
    #[serde(default)]
    pub refined: bool,
    /// Set when the same source sentence has translations by several translators.
    #[serde(default, skip_serializing_if = "is_false")]
    pub multi_reference: bool,
    #[serde(flatten)]
    pub extra: ExtraFields,
}

impl SentencePair {
    /// Checks the record-level invariants: non-empty sides, finite non-negative score.
    pub fn validate(&self) -> Result<(), InvalidPair> {
        if self.grc.trim().is_empty() {
            return Err(InvalidPair::EmptySide(Side::Grc));
        }
        if self.ell.trim().is_empty() {
            return Err(InvalidPair::EmptySide(Side::Ell));
        }
        if !self.score.is_finite() || self.score < 0.0 {
            return Err(InvalidPair::BadScore(self.score));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum InvalidPair {
    #[error("{} side is empty", .0.as_str())]
    EmptySide(Side),
    #[error("score {0} is not a finite non-negative number")]
    BadScore(f64),
}

fn is_false(b: &bool) -> bool {
    !*b
}
