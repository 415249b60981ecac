//! File plumbing: JSONL records, JSON documents, atomic writes.
//!
//! Everything written is UTF-8 in NFC; a leading byte-order mark is ignored
//! on read.

use std::fs;
use std::path::{Path, PathBuf};

use agmg_core::model::{Document, SentencePair};
use serde::de::DeserializeOwned;
use serde::Serialize;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Record { path: PathBuf, line: usize, message: String },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl FileError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        FileError::Io { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, message: impl Into<String>) -> Self {
        FileError::Format { path: path.to_path_buf(), message: message.into() }
    }

    /// The file the error is about.
    pub fn path(&self) -> &Path {
        match self {
            FileError::Io { path, .. } | FileError::Record { path, .. } | FileError::Format { path, .. } => path,
        }
    }
}

/// A line that failed to decode.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, FileError> {
    fs::read(path).map_err(|e| FileError::io(path, e))
}

/// Reads a UTF-8 file, dropping a leading byte-order mark.
pub fn read_text(path: &Path) -> Result<String, FileError> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(|e| FileError::format(path, format!("not UTF-8: {e}")))?;
    Ok(match text.strip_prefix('\u{FEFF}') {
        Some(rest) => rest.to_string(),
        None => text,
    })
}

/// Writes through a temporary sibling and renames, creating parent directories.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), FileError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| FileError::io(path, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| FileError::io(path, e))?;
    fs::rename(&tmp, path).map_err(|e| FileError::io(path, e))
}

pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

/// One JSON object per line, NFC-normalized. Newlines inside strings are escaped.
pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&nfc(&serde_json::to_string(r).expect("records serialize")));
        out.push('\n');
    }
    out
}

/// Decodes every non-blank line, collecting failures instead of stopping.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> (Vec<T>, Vec<LineError>) {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => records.push(r),
            Err(e) => errors.push(LineError { line: i + 1, message: e.to_string() }),
        }
    }
    (records, errors)
}

/// Every record of a JSONL file; the first bad line is an error.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, FileError> {
    let (records, errors) = parse_jsonl(&read_text(path)?);
    match errors.into_iter().next() {
        Some(LineError { line, message }) => Err(FileError::Record { path: path.to_path_buf(), line, message }),
        None => Ok(records),
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), FileError> {
    write_atomic(path, to_jsonl(records).as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FileError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| FileError::format(path, e.to_string()))
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = nfc(&serde_json::to_string_pretty(value).expect("value serializes"));
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FileError> {
    write_atomic(path, to_json_pretty(value).as_bytes())
}

/// Documents read so far and the lines that failed schema checks.
#[derive(Debug, Default)]
pub struct Documents {
    pub documents: Vec<Document>,
    pub malformed: Vec<LineError>,
}

/// Documents in file order. Malformed lines are returned, not dropped.
pub fn read_documents(path: &Path) -> Result<Documents, FileError> {
    let (documents, malformed) = parse_jsonl(&read_text(path)?);
    Ok(Documents { documents, malformed })
}

pub fn write_documents(path: &Path, docs: &[Document]) -> Result<(), FileError> {
    write_jsonl(path, docs)
}

/// Pairs in file order; a line that does not decode or violates the pair
/// invariants is an error naming its line.
pub fn read_pairs(path: &Path) -> Result<Vec<SentencePair>, FileError> {
    let text = read_text(path)?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let err = |message: String| FileError::Record { path: path.to_path_buf(), line: i + 1, message };
        let pair: SentencePair = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        pair.validate().map_err(|e| err(e.to_string()))?;
        pairs.push(pair);
    }
    Ok(pairs)
}

pub fn write_pairs(path: &Path, pairs: &[SentencePair]) -> Result<(), FileError> {
    write_jsonl(path, pairs)
}
