use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::{check_corpus, MetricConfig, MetricError};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    None,
    #[default]
    #[serde(alias = "exp")]
    Exponential,
}

/// Sufficient statistics for corpus BLEU.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BleuStats {
    pub hyp_len: usize,
    pub ref_len: usize,
    /// Clipped matches per order.
    pub correct: Vec<usize>,
    /// Hypothesis n-grams per order.
    pub total: Vec<usize>,
}

impl AddAssign<&BleuStats> for BleuStats {
    fn add_assign(&mut self, other: &BleuStats) {
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
        for (v, o) in [(&mut self.correct, &other.correct), (&mut self.total, &other.total)] {
            if v.len() < o.len() {
                v.resize(o.len(), 0);
            }
            for (a, b) in v.iter_mut().zip(o) {
                *a += b;
            }
        }
    }
}

fn ngram_counts(tokens: &[String], max_order: usize) -> BTreeMap<&[String], usize> {
    let mut counts = BTreeMap::new();
    for n in 1..=max_order.min(tokens.len()) {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

pub fn segment_stats(hyp: &[String], reference: &[String], max_order: usize) -> BleuStats {
    let hyp_counts = ngram_counts(hyp, max_order);
    let ref_counts = ngram_counts(reference, max_order);
    let mut stats = BleuStats {
        hyp_len: hyp.len(),
        ref_len: reference.len(),
        correct: vec![0; max_order],
        total: vec![0; max_order],
    };
    for (gram, &count) in &hyp_counts {
        let n = gram.len() - 1;
        stats.total[n] += count;
        stats.correct[n] += count.min(ref_counts.get(gram).copied().unwrap_or(0));
    }
    stats
}

/// Corpus BLEU in [0, 100] from aggregated statistics.
pub fn score_from_stats(stats: &BleuStats, smoothing: Smoothing) -> f64 {
    let max_order = stats.total.len();
    if max_order == 0 || stats.correct.iter().all(|&c| c == 0) {
        return 0.0;
    }
    let bp = if stats.hyp_len < stats.ref_len {
        if stats.hyp_len == 0 {
            0.0
        } else {
            libm::exp(1.0 - stats.ref_len as f64 / stats.hyp_len as f64)
        }
    } else {
        1.0
    };
    let mut precisions = vec![0.0; max_order];
    let mut smooth = 1.0;
    for (n, p) in precisions.iter_mut().enumerate() {
        let total = stats.total[n];
        if total == 0 {
            break;
        }
        let correct = stats.correct[n];
        *p = if correct > 0 {
            correct as f64 / total as f64
        } else if smoothing == Smoothing::Exponential {
            smooth *= 2.0;
            1.0 / (smooth * total as f64)
        } else {
            0.0
        };
    }
    if precisions.contains(&0.0) {
        return 0.0;
    }
    let log_sum: f64 = precisions.iter().map(|&p| libm::log(p)).sum();
    // Working with fractions keeps a perfect match at exactly 100.
    100.0 * bp * libm::exp(log_sum / max_order as f64)
}

pub fn bleu(hyps: &[&str], refs: &[&str], cfg: &MetricConfig) -> Result<f64, MetricError> {
    check_corpus(hyps, refs)?;
    cfg.validate()?;
    let mut stats = BleuStats::default();
    for (h, r) in hyps.iter().zip(refs) {
        stats += &segment_stats(&cfg.bleu_tokenizer.tokenize(h), &cfg.bleu_tokenizer.tokenize(r), cfg.bleu_max_order);
    }
    if stats.total.is_empty() {
        stats.total = vec![0; cfg.bleu_max_order];
        stats.correct = vec![0; cfg.bleu_max_order];
    }
    Ok(score_from_stats(&stats, cfg.bleu_smoothing))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(smoothing: Smoothing) -> MetricConfig {
        MetricConfig { bleu_smoothing: smoothing, ..MetricConfig::default() }
    }

    #[test]
    fn worksheet() {
        // Clipped matches 5/6, 3/5, 1/4, 0/3; the zero 4-gram precision
        // smooths to 1/(2*3), so BLEU = 100 * (1/48)^(1/4).
        let s = bleu(&["the cat sat on the mat"], &["the cat is on the mat"], &cfg(Smoothing::Exponential)).unwrap();
        let expected = 100.0 * libm::pow(1.0 / 48.0, 0.25);
        assert!((s - expected).abs() < 1e-9, "{s} vs {expected}");
        assert!((s - 37.991784).abs() < 1e-5);
        let stats = segment_stats(
            &BleuTokenizer::ThirteenA.tokenize("the cat sat on the mat"),
            &BleuTokenizer::ThirteenA.tokenize("the cat is on the mat"),
            4,
        );
        assert_eq!((stats.correct, stats.total), (vec![5, 3, 1, 0], vec![6, 5, 4, 3]));
        assert_eq!(bleu(&["the cat sat on the mat"], &["the cat is on the mat"], &cfg(Smoothing::None)).unwrap(), 0.0);
    }

    use super::super::BleuTokenizer;

    #[test]
    fn identities() {
        let c = cfg(Smoothing::None);
        assert_eq!(bleu(&["a b c d e", "ὁ λόγος."], &["a b c d e", "ὁ λόγος."], &c).unwrap(), 100.0);
        assert_eq!(bleu(&["x y z"], &["a b c"], &c).unwrap(), 0.0);
        assert_eq!(bleu(&["x y z"], &["a b c"], &cfg(Smoothing::Exponential)).unwrap(), 0.0);
        assert_eq!(bleu(&[""], &["a"], &c).unwrap(), 0.0);
    }

    #[test]
    fn brevity_penalty() {
        let s = bleu(&["a b c d"], &["a b c d e f g h"], &cfg(Smoothing::None)).unwrap();
        assert!((s - 100.0 * libm::exp(1.0 - 2.0)).abs() < 1e-9);
    }

    #[test]
    fn short_segments_stop_at_missing_orders() {
        // No 3- or 4-grams at all: the loop stops and those precisions stay 0.
        assert_eq!(bleu(&["a b"], &["a b"], &cfg(Smoothing::Exponential)).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        let c = MetricConfig::default();
        assert_eq!(bleu(&[], &[], &c), Err(MetricError::EmptyCorpus));
        assert_eq!(bleu(&["a"], &["a", "b"], &c), Err(MetricError::LengthMismatch { hyps: 1, refs: 2 }));
    }
}
