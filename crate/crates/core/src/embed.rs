//! Sentence-vector provider contract, overlap-window tables and the built-in
//! character n-gram embedder.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::normalize::strip_diacritics;

/// A sentence embedding together with its Euclidean norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceVector {
    values: Vec<f32>,
    norm: f32,
}

impl SentenceVector {
    /// Wraps raw values. Non-finite components are rejected.
    pub fn new(values: Vec<f32>) -> Result<Self, EmbedError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        let norm = libm::sqrt(values.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>()) as f32;
        Ok(SentenceVector { values, norm })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn norm(&self) -> f32 {
        self.norm
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    /// Unit-length copy. Zero vectors stay zero.
    pub fn normalized(&self) -> SentenceVector {
        if self.norm == 0.0 {
            return self.clone();
        }
        let inv = 1.0 / f64::from(self.norm);
        let values: Vec<f32> = self.values.iter().map(|&v| (f64::from(v) * inv) as f32).collect();
        SentenceVector::new(values).expect("scaling finite values stays finite")
    }

    /// `self - other`, component-wise.
    pub fn minus(&self, other: &SentenceVector) -> SentenceVector {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        SentenceVector::new(values).expect("difference of finite values is finite")
    }

    /// Component-wise mean of `vectors`, which must be non-empty and share a dimension.
    pub fn mean<'a>(vectors: impl IntoIterator<Item = &'a SentenceVector>) -> SentenceVector {
        let mut acc: Vec<f64> = Vec::new();
        let mut count = 0usize;
        for v in vectors {
            if acc.is_empty() {
                acc = alloc::vec![0.0; v.dimension()];
            }
            for (a, &x) in acc.iter_mut().zip(v.values()) {
                *a += f64::from(x);
            }
            count += 1;
        }
        let scale = if count == 0 { 0.0 } else { 1.0 / count as f64 };
        SentenceVector::new(acc.into_iter().map(|a| (a * scale) as f32).collect())
            .expect("mean of finite values is finite")
    }
}

/// Cosine similarity. Zero-norm inputs have no direction and are an error.
pub fn cosine(a: &SentenceVector, b: &SentenceVector) -> Result<f64, EmbedError> {
    if a.dimension() != b.dimension() {
        return Err(EmbedError::Dimension { expected: a.dimension(), got: b.dimension() });
    }
    if a.norm == 0.0 || b.norm == 0.0 {
        return Err(EmbedError::ZeroNorm);
    }
    let dot: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum();
    Ok(dot / (f64::from(a.norm) * f64::from(b.norm)))
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error("text is empty after normalization")]
    EmptyText,
    #[error("no vector available for text {0:?}")]
    Missing(String),
    #[error("vector dimension {got} does not match provider dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("vector has a non-finite component")]
    NonFinite,
    #[error("vector has zero norm")]
    ZeroNorm,
    #[error("overlap window must be at least 1")]
    ZeroWindow,
    #[error("embedding provider failed: {0}")]
    Provider(String),
}

/// Failure of one text inside a batch.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("text {index}: {source}")]
pub struct BatchError {
    pub index: usize,
    pub source: EmbedError,
}

/// Anything that maps a text to a fixed-dimension vector.
pub trait EmbeddingProvider {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<SentenceVector, EmbedError>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for &P {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }

    fn embed(&self, text: &str) -> Result<SentenceVector, EmbedError> {
        (**self).embed(text)
    }
}

/// Embeds every text, failing on the first text the provider rejects.
pub fn embed_batch<P: EmbeddingProvider + ?Sized>(
    texts: &[String],
    provider: &P,
) -> Result<Vec<SentenceVector>, BatchError> {
    texts
        .iter()
        .enumerate()
        .map(|(index, text)| {
            if text.trim().is_empty() {
                return Err(BatchError { index, source: EmbedError::EmptyText });
            }
            let v = provider.embed(text).map_err(|source| BatchError { index, source })?;
            if v.dimension() != provider.dimension() {
                return Err(BatchError {
                    index,
                    source: EmbedError::Dimension { expected: provider.dimension(), got: v.dimension() },
                });
            }
            Ok(v)
        })
        .collect()
}

/// Deterministic embedder: hashed character 1..=3-grams of diacritic-folded,
/// lowercased text, L2-normalized.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HashEmbedder {
    pub dimension: usize,
    pub max_order: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder { dimension: 256, max_order: 3 }
    }
}

/// Folding applied before hashing so polytonic and monotonic spellings meet.
pub fn fold_for_embedding(text: &str) -> Vec<char> {
    let mut out = Vec::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        for lower in strip_diacritics(c).to_lowercase() {
            out.push(if lower == 'ς' { 'σ' } else { lower });
        }
    }
    out
}

fn fnv1a(order: usize, gram: &[char]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |b: u8| {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    };
    feed(order as u8);
    let mut buf = [0u8; 4];
    for c in gram {
        c.encode_utf8(&mut buf).bytes().for_each(&mut feed);
    }
    h
}

impl EmbeddingProvider for HashEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<SentenceVector, EmbedError> {
        let folded = fold_for_embedding(text);
        if folded.is_empty() || self.dimension == 0 {
            return Err(EmbedError::EmptyText);
        }
        let mut counts = alloc::vec![0f64; self.dimension];
        for order in 1..=self.max_order.max(1) {
            for gram in folded.windows(order) {
                let bucket = (fnv1a(order, gram) % self.dimension as u64) as usize;
                counts[bucket] += 1.0;
            }
        }
        let norm = libm::sqrt(counts.iter().map(|c| c * c).sum::<f64>());
        SentenceVector::new(counts.into_iter().map(|c| (c / norm) as f32).collect())
    }
}

/// Text of the window of `len` consecutive sentences starting at `start`.
pub fn window_text(sentences: &[String], start: usize, len: usize) -> String {
    sentences[start..start + len].join(" ")
}

/// Vectors for every window of 1..=k consecutive sentences.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapTable {
    max_window: usize,
    sentences: usize,
    /// `rows[len - 1][start]`.
    rows: Vec<Vec<SentenceVector>>,
}

impl OverlapTable {
    /// Window length limit actually usable: `min(k, n)`.
    fn effective_window(max_window: usize, n: usize) -> usize {
        max_window.min(n)
    }

    /// Number of entries a complete table holds for `n` sentences and window `k`.
    pub fn expected_entries(n: usize, k: usize) -> usize {
        (1..=k.min(n)).map(|l| n - l + 1).sum()
    }

    /// Builds a table from already computed window vectors, laid out as
    /// `rows[len - 1][start]`.
    pub fn from_rows(max_window: usize, sentences: usize, rows: Vec<Vec<SentenceVector>>) -> Result<Self, EmbedError> {
        if max_window == 0 {
            return Err(EmbedError::ZeroWindow);
        }
        let eff = Self::effective_window(max_window, sentences);
        if rows.len() != eff || rows.iter().enumerate().any(|(l, r)| r.len() != sentences - l) {
            return Err(EmbedError::Provider(String::from("overlap rows do not cover every window")));
        }
        Ok(OverlapTable { max_window, sentences, rows })
    }

    /// Table whose window vectors are the mean of their member sentence vectors.
    pub fn from_sentence_vectors(base: Vec<SentenceVector>, max_window: usize) -> Result<Self, EmbedError> {
        if max_window == 0 {
            return Err(EmbedError::ZeroWindow);
        }
        let n = base.len();
        let eff = Self::effective_window(max_window, n);
        let mut rows = Vec::with_capacity(eff);
        for len in 2..=eff {
            let row: Vec<SentenceVector> = (0..=n - len)
                .map(|start| SentenceVector::mean(&base[start..start + len]))
                .collect();
            rows.push(row);
        }
        if eff >= 1 {
            rows.insert(0, base);
        }
        Ok(OverlapTable { max_window, sentences: n, rows })
    }

    pub fn max_window(&self) -> usize {
        self.max_window
    }

    /// Number of sentences the table covers.
    pub fn sentences(&self) -> usize {
        self.sentences
    }

    pub fn len(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences == 0
    }

    pub fn get(&self, start: usize, len: usize) -> Option<&SentenceVector> {
        if len == 0 {
            return None;
        }
        self.rows.get(len - 1)?.get(start)
    }

    /// The single-sentence vectors.
    pub fn singles(&self) -> &[SentenceVector] {
        self.rows.first().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Applies `f` to every entry.
    pub fn map(&self, mut f: impl FnMut(&SentenceVector) -> SentenceVector) -> OverlapTable {
        let rows = self.rows.iter().map(|row| row.iter().map(&mut f).collect()).collect();
        OverlapTable { max_window: self.max_window, sentences: self.sentences, rows }
    }

    /// All entries in row-major order.
    pub fn vectors(&self) -> impl Iterator<Item = &SentenceVector> + '_ {
        self.rows.iter().flatten()
    }

    /// All `(start, len)` keys in row-major order.
    pub fn keys(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(l, row)| (0..row.len()).map(move |s| (s, l + 1)))
    }
}

/// Every window text `(start, len, text)` for `sentences` and window `k`.
pub fn overlap_windows(sentences: &[String], k: usize) -> Vec<(usize, usize, String)> {
    let n = sentences.len();
    let mut out = Vec::new();
    for len in 1..=k.min(n) {
        for start in 0..=n - len {
            out.push((start, len, window_text(sentences, start, len)));
        }
    }
    out
}

/// Embeds every overlap window of `sentences` with `provider`.
pub fn build_overlaps<P: EmbeddingProvider + ?Sized>(
    sentences: &[String],
    k: usize,
    provider: &P,
) -> Result<OverlapTable, BatchError> {
    if k == 0 {
        return Err(BatchError { index: 0, source: EmbedError::ZeroWindow });
    }
    let n = sentences.len();
    let eff = k.min(n);
    let windows = overlap_windows(sentences, k);
    let texts: Vec<String> = windows.into_iter().map(|(_, _, t)| t).collect();
    let mut vectors = embed_batch(&texts, provider)?.into_iter();
    let rows = (1..=eff)
        .map(|len| vectors.by_ref().take(n - len + 1).collect())
        .collect();
    Ok(OverlapTable { max_window: k, sentences: n, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn builtin_is_deterministic() {
        let e = HashEmbedder::default();
        let out = embed_batch(&s(&["λόγος ἐστί", "λόγος ἐστί"]), &e).unwrap();
        assert_eq!(out[0], out[1]);
        assert_eq!(out[0].dimension(), 256);
        assert!((f64::from(out[0].norm()) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn empty_text_reports_its_index() {
        let e = HashEmbedder::default();
        let err = embed_batch(&s(&["α", "", "β"]), &e).unwrap_err();
        assert_eq!(err.index, 1);
        assert_eq!(err.source, EmbedError::EmptyText);
    }

    #[test]
    fn unrelated_texts_are_not_parallel() {
        let e = HashEmbedder::default();
        let a = e.embed("ὁ ἥλιος λάμπει").unwrap();
        let b = e.embed("xyz qwv 123").unwrap();
        let c = cosine(&a, &b).unwrap();
        assert!(c < 1.0, "cosine {c}");
        assert!(c < 0.2, "cosine {c}");
    }

    #[test]
    fn folding_brings_polytonic_and_monotonic_together() {
        let e = HashEmbedder::default();
        let poly = e.embed("Ἡ ψυχὴ ἀθάνατος").unwrap();
        let mono = e.embed("η ψυχή αθάνατος").unwrap();
        assert!((cosine(&poly, &mono).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn overlap_counts() {
        let e = HashEmbedder::default();
        let t = build_overlaps(&s(&["α", "β", "γ"]), 2, &e).unwrap();
        assert_eq!(t.len(), 5);
        let keys: Vec<_> = t.keys().collect();
        assert_eq!(keys, vec![(0, 1), (1, 1), (2, 1), (0, 2), (1, 2)]);
        assert_eq!(t.get(1, 2).unwrap(), &e.embed("β γ").unwrap());

        let one = build_overlaps(&s(&["α"]), 4, &e).unwrap();
        assert_eq!(one.len(), 1);

        let err = build_overlaps(&s(&["α"]), 0, &e).unwrap_err();
        assert_eq!(err.source, EmbedError::ZeroWindow);
    }

    #[test]
    fn zero_norm_cosine_is_error() {
        let z = SentenceVector::new(vec![0.0, 0.0]).unwrap();
        let o = SentenceVector::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(cosine(&z, &o), Err(EmbedError::ZeroNorm));
        assert!(SentenceVector::new(vec![f32::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn self_similarity_and_symmetry(a in "[α-ωά-ώ ]{1,30}", b in "[α-ωa-z ]{1,30}") {
            prop_assume!(!a.trim().is_empty() && !b.trim().is_empty());
            let e = HashEmbedder::default();
            let va = e.embed(&a).unwrap();
            let vb = e.embed(&b).unwrap();
            prop_assert!((cosine(&va, &va).unwrap() - 1.0).abs() < 1e-6);
            let ab = cosine(&va, &vb).unwrap();
            let ba = cosine(&vb, &va).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
        }

        #[test]
        fn batch_order_is_equivariant(texts in proptest::collection::vec("[α-ω]{1,10}", 1..8)) {
            let e = HashEmbedder::default();
            let forward = embed_batch(&texts, &e).unwrap();
            let reversed: Vec<String> = texts.iter().rev().cloned().collect();
            let mut backward = embed_batch(&reversed, &e).unwrap();
            backward.reverse();
            prop_assert_eq!(forward, backward);
        }

        #[test]
        fn table_is_complete(n in 1usize..12, k in 1usize..6) {
            let sentences: Vec<String> = (0..n).map(|i| alloc::format!("σ{i}")).collect();
            let t = build_overlaps(&sentences, k, &HashEmbedder::default()).unwrap();
            prop_assert_eq!(t.len(), OverlapTable::expected_entries(n, k));
            for (start, len) in t.keys() {
                prop_assert!(start + len <= n && len <= k);
            }
        }
    }
}
