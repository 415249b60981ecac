//! Binary sentence-vector files and a lookup provider built on them.
//!
//! Layout, little-endian: 4-byte magic `AGV1`, `u32` dimension, `u32` count,
//! then `count * dimension` `f32` values. The sidecar `<file>.txt` lists the
//! embedded strings, one per line, in the same order.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use agmg_core::embed::{EmbedError, EmbeddingProvider, SentenceVector};

use crate::io::{read_bytes, read_text, write_atomic, FileError};

pub const MAGIC: [u8; 4] = *b"AGV1";
const HEADER_LEN: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct VectorFile {
    pub dimension: usize,
    pub vectors: Vec<SentenceVector>,
}

pub fn encode(file: &VectorFile) -> Result<Vec<u8>, String> {
    if file.dimension == 0 {
        return Err("dimension must be at least 1".into());
    }
    if let Some((i, v)) = file.vectors.iter().enumerate().find(|(_, v)| v.dimension() != file.dimension) {
        return Err(format!("vector {i} has dimension {}, expected {}", v.dimension(), file.dimension));
    }
    let dim = u32::try_from(file.dimension).map_err(|_| "dimension exceeds u32")?;
    let count = u32::try_from(file.vectors.len()).map_err(|_| "count exceeds u32")?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * file.dimension * file.vectors.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    for v in &file.vectors {
        for x in v.values() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

fn u32_at(bytes: &[u8], at: usize) -> usize {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize
}

pub fn decode(bytes: &[u8]) -> Result<VectorFile, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("file is {} bytes, shorter than the header", bytes.len()));
    }
    if bytes[..4] != MAGIC {
        return Err("bad magic; not a vector file".into());
    }
    let dimension = u32_at(bytes, 4);
    let count = u32_at(bytes, 8);
    if dimension == 0 {
        return Err("header dimension is 0".into());
    }
    let body = &bytes[HEADER_LEN..];
    let expected = count.checked_mul(dimension).and_then(|n| n.checked_mul(4)).ok_or("header overflows")?;
    if body.len() != expected {
        return Err(format!(
            "header declares {count} vectors of dimension {dimension} ({expected} bytes) but the body has {} bytes",
            body.len()
        ));
    }
    let vectors = body
        .chunks_exact(4 * dimension)
        .enumerate()
        .map(|(i, chunk)| {
            let values = chunk.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect();
            SentenceVector::new(values).map_err(|e| format!("vector {i}: {e}"))
        })
        .collect::<Result<_, _>>()?;
    Ok(VectorFile { dimension, vectors })
}

pub fn read_vectors(path: &Path) -> Result<VectorFile, FileError> {
    decode(&read_bytes(path)?).map_err(|m| FileError::format(path, m))
}

pub fn write_vectors(path: &Path, file: &VectorFile) -> Result<(), FileError> {
    let bytes = encode(file).map_err(|m| FileError::format(path, m))?;
    write_atomic(path, &bytes)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".txt");
    PathBuf::from(p)
}

/// Vectors keyed by the text they embed.
#[derive(Clone, Debug)]
pub struct VectorStore {
    pub texts: Vec<String>,
    pub file: VectorFile,
    index: HashMap<String, usize>,
}

impl VectorStore {
    pub fn new(texts: Vec<String>, file: VectorFile) -> Result<Self, String> {
        if texts.len() != file.vectors.len() {
            return Err(format!("{} texts for {} vectors", texts.len(), file.vectors.len()));
        }
        if let Some(t) = texts.iter().find(|t| t.contains('\n')) {
            return Err(format!("text {t:?} contains a newline"));
        }
        let mut index = HashMap::with_capacity(texts.len());
        for (i, t) in texts.iter().enumerate() {
            index.entry(t.clone()).or_insert(i);
        }
        Ok(VectorStore { texts, file, index })
    }

    pub fn read(path: &Path) -> Result<Self, FileError> {
        let file = read_vectors(path)?;
        let side = sidecar_path(path);
        let listing = read_text(&side)?;
        let texts: Vec<String> = listing.lines().map(String::from).collect();
        VectorStore::new(texts, file).map_err(|m| FileError::format(&side, m))
    }

    pub fn write(&self, path: &Path) -> Result<(), FileError> {
        write_vectors(path, &self.file)?;
        let mut listing = String::new();
        for t in &self.texts {
            listing.push_str(t);
            listing.push('\n');
        }
        write_atomic(&sidecar_path(path), listing.as_bytes())
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }
}

impl EmbeddingProvider for VectorStore {
    fn dimension(&self) -> usize {
        self.file.dimension
    }

    fn embed(&self, text: &str) -> Result<SentenceVector, EmbedError> {
        self.index
            .get(text)
            .map(|&i| self.file.vectors[i].clone())
            .ok_or_else(|| EmbedError::Missing(text.to_string()))
    }
}
