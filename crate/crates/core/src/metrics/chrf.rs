use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::tokenize::py_split;
use super::{check_corpus, MetricConfig, MetricError};

/// How per-order precision and recall combine into one score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChrfAveraging {
    /// Average precision and recall over orders with n-grams on both sides,
    /// then take one F-score.
    #[default]
    EffectiveOrder,
    /// Arithmetic mean of per-order F-scores, with a tiny epsilon for empty orders.
    PerOrderF,
}

/// (hyp, ref, match) counts per order: character orders first, then word orders.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChrfStats(pub Vec<[usize; 3]>);

impl AddAssign<&ChrfStats> for ChrfStats {
    fn add_assign(&mut self, other: &ChrfStats) {
        if self.0.len() < other.0.len() {
            self.0.resize(other.0.len(), [0; 3]);
        }
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for k in 0..3 {
                a[k] += b[k];
            }
        }
    }
}

const PUNCTS: &str = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

/// Whitespace split with one leading or trailing ASCII punctuation mark peeled off.
pub fn chrf_words(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for w in py_split(text) {
        let mut chars = w.char_indices();
        let first = chars.next();
        let second = chars.next();
        if second.is_none() {
            out.push(w);
            continue;
        }
        let last = w.chars().next_back().expect("non-empty word");
        if PUNCTS.contains(last) {
            let cut = w.len() - last.len_utf8();
            out.extend([&w[..cut], &w[cut..]]);
        } else if let Some((_, c)) = first.filter(|(_, c)| PUNCTS.contains(*c)) {
            out.extend([&w[..c.len_utf8()], &w[c.len_utf8()..]]);
        } else {
            out.push(w);
        }
    }
    out
}

fn counts<T: Ord>(items: impl Iterator<Item = T>) -> BTreeMap<T, usize> {
    let mut m = BTreeMap::new();
    for i in items {
        *m.entry(i).or_insert(0) += 1;
    }
    m
}

fn match_stats<T: Ord>(hyp: &BTreeMap<T, usize>, reference: &BTreeMap<T, usize>) -> [usize; 3] {
    let mut hyp_count = 0;
    let mut matched = 0;
    for (g, &c) in hyp {
        hyp_count += c;
        matched += c.min(reference.get(g).copied().unwrap_or(0));
    }
    // Hypothesis n-grams only count when the reference has some of that order.
    [if reference.is_empty() { 0 } else { hyp_count }, reference.values().sum(), matched]
}

fn char_grams(chars: &[char], n: usize) -> BTreeMap<&[char], usize> {
    counts(chars.windows(n))
}

fn word_grams<'a>(words: &'a [&'a str], n: usize) -> BTreeMap<&'a [&'a str], usize> {
    counts(words.windows(n))
}

pub fn segment_stats(hyp: &str, reference: &str, char_order: usize, word_order: usize) -> ChrfStats {
    let hc: Vec<char> = py_split(hyp).flat_map(str::chars).collect();
    let rc: Vec<char> = py_split(reference).flat_map(str::chars).collect();
    let mut out = Vec::with_capacity(char_order + word_order);
    for n in 1..=char_order {
        out.push(match_stats(&char_grams(&hc, n), &char_grams(&rc, n)));
    }
    if word_order > 0 {
        let hw = chrf_words(hyp);
        let rw = chrf_words(reference);
        for n in 1..=word_order {
            out.push(match_stats(&word_grams(&hw, n), &word_grams(&rw, n)));
        }
    }
    ChrfStats(out)
}

/// Score in [0, 100] from aggregated statistics.
pub fn score_from_stats(stats: &ChrfStats, beta: f64, averaging: ChrfAveraging) -> f64 {
    const EPS: f64 = 1e-16;
    let factor = beta * beta;
    let (mut f_sum, mut p_sum, mut r_sum, mut effective) = (0.0, 0.0, 0.0, 0usize);
    for &[n_hyp, n_ref, n_match] in &stats.0 {
        let p = if n_hyp > 0 { n_match as f64 / n_hyp as f64 } else { EPS };
        let r = if n_ref > 0 { n_match as f64 / n_ref as f64 } else { EPS };
        let denom = factor * p + r;
        f_sum += if denom > 0.0 { (1.0 + factor) * p * r / denom } else { EPS };
        if n_hyp > 0 && n_ref > 0 {
            p_sum += p;
            r_sum += r;
            effective += 1;
        }
    }
    match averaging {
        ChrfAveraging::PerOrderF => {
            if stats.0.is_empty() {
                0.0
            } else {
                100.0 * f_sum / stats.0.len() as f64
            }
        }
        ChrfAveraging::EffectiveOrder => {
            if effective == 0 {
                return 0.0;
            }
            let (p, r) = (p_sum / effective as f64, r_sum / effective as f64);
            if p + r == 0.0 {
                0.0
            } else {
                100.0 * (1.0 + factor) * p * r / (factor * p + r)
            }
        }
    }
}

/// Corpus chrF with `word_order` word n-gram orders (0 for chrF, 2 for chrF++).
pub fn chrf_with_order(hyps: &[&str], refs: &[&str], cfg: &MetricConfig, word_order: usize) -> Result<f64, MetricError> {
    check_corpus(hyps, refs)?;
    cfg.validate()?;
    let mut stats = ChrfStats::default();
    for (h, r) in hyps.iter().zip(refs) {
        stats += &segment_stats(h, r, cfg.chrf_char_order, word_order);
    }
    Ok(score_from_stats(&stats, cfg.chrf_beta, cfg.chrf_averaging))
}

/// Corpus chrF: character n-grams only.
pub fn chrf(hyps: &[&str], refs: &[&str], cfg: &MetricConfig) -> Result<f64, MetricError> {
    chrf_with_order(hyps, refs, cfg, 0)
}

/// Corpus chrF++: character n-grams plus `cfg.chrf_word_order` word orders.
pub fn chrfpp(hyps: &[&str], refs: &[&str], cfg: &MetricConfig) -> Result<f64, MetricError> {
    chrf_with_order(hyps, refs, cfg, cfg.chrf_word_order)
}
