//! Corpus-level BLEU, chrF, chrF++ and TER following the sacreBLEU conventions.
//!
//! Every metric is computed from per-segment sufficient statistics that are
//! summed over the corpus and scored once.

pub mod bleu;
pub mod chrf;
pub mod ter;
pub mod tokenize;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use bleu::{bleu, Smoothing};
pub use chrf::{chrf, chrfpp, ChrfAveraging};
pub use ter::ter;
pub use tokenize::{tokenize_13a, tokenize_intl, tokenize_tercom, BleuTokenizer};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("{hyps} hypotheses but {refs} references")]
    LengthMismatch { hyps: usize, refs: usize },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("reference segment {index} has no tokens")]
    EmptyReference { index: usize },
    #[error("invalid metric config: {0}")]
    Config(&'static str),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub bleu_tokenizer: BleuTokenizer,
    pub bleu_max_order: usize,
    pub bleu_smoothing: Smoothing,
    pub chrf_char_order: usize,
    /// Word n-gram orders added for chrF++.
    pub chrf_word_order: usize,
    pub chrf_beta: f64,
    pub chrf_averaging: ChrfAveraging,
    pub ter_normalized: bool,
    pub ter_case_sensitive: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            bleu_tokenizer: BleuTokenizer::ThirteenA,
            bleu_max_order: 4,
            bleu_smoothing: Smoothing::Exponential,
            chrf_char_order: 6,
            chrf_word_order: 2,
            chrf_beta: 2.0,
            chrf_averaging: ChrfAveraging::EffectiveOrder,
            ter_normalized: true,
            ter_case_sensitive: false,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<(), MetricError> {
        if self.bleu_max_order == 0 {
            return Err(MetricError::Config("bleu_max_order must be at least 1"));
        }
        if self.chrf_char_order == 0 {
            return Err(MetricError::Config("chrf_char_order must be at least 1"));
        }
        if !(self.chrf_beta > 0.0 && self.chrf_beta.is_finite()) {
            return Err(MetricError::Config("chrf_beta must be positive"));
        }
        Ok(())
    }
}

pub(crate) fn check_corpus(hyps: &[&str], refs: &[&str]) -> Result<(), MetricError> {
    if hyps.len() != refs.len() {
        return Err(MetricError::LengthMismatch { hyps: hyps.len(), refs: refs.len() });
    }
    if hyps.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentScore {
    pub bleu: f64,
    pub chrf: f64,
    pub chrfpp: f64,
    pub ter: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu: f64,
    pub chrf: f64,
    pub chrfpp: f64,
    /// Edits per reference token; lower is better.
    pub ter: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment_scores: Option<Vec<SegmentScore>>,
    /// Scores computed by other tools, such as neural metrics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external: Option<BTreeMap<String, f64>>,
}

struct SegmentStats {
    bleu: bleu::BleuStats,
    chrf: chrf::ChrfStats,
    ter: ter::TerStats,
}

fn segment(h: &str, r: &str, cfg: &MetricConfig) -> SegmentStats {
    let tok = cfg.bleu_tokenizer;
    SegmentStats {
        bleu: bleu::segment_stats(&tok.tokenize(h), &tok.tokenize(r), cfg.bleu_max_order),
        chrf: chrf::segment_stats(h, r, cfg.chrf_char_order, cfg.chrf_word_order),
        ter: ter::segment_stats(h, r, cfg),
    }
}

/// chrF statistics restricted to the character orders.
fn char_only(stats: &chrf::ChrfStats, char_order: usize) -> chrf::ChrfStats {
    chrf::ChrfStats(stats.0[..char_order.min(stats.0.len())].to_vec())
}

/// All four metrics in one pass over the corpus.
pub fn score(hyps: &[&str], refs: &[&str], cfg: &MetricConfig, with_segments: bool) -> Result<MetricReport, MetricError> {
    check_corpus(hyps, refs)?;
    cfg.validate()?;
    let mut b = bleu::BleuStats::default();
    let mut c = chrf::ChrfStats::default();
    let mut t = ter::TerStats::default();
    let mut segments = with_segments.then(Vec::new);
    for (i, (h, r)) in hyps.iter().zip(refs).enumerate() {
        let s = segment(h, r, cfg);
        if s.ter.ref_len == 0 {
            return Err(MetricError::EmptyReference { index: i });
        }
        if let Some(out) = segments.as_mut() {
            out.push(segment_score(&s, cfg));
        }
        b += &s.bleu;
        c += &s.chrf;
        t += &s.ter;
    }
    Ok(MetricReport {
        bleu: bleu::score_from_stats(&b, cfg.bleu_smoothing),
        chrf: chrf::score_from_stats(&char_only(&c, cfg.chrf_char_order), cfg.chrf_beta, cfg.chrf_averaging),
        chrfpp: chrf::score_from_stats(&c, cfg.chrf_beta, cfg.chrf_averaging),
        ter: t.score(),
        segment_scores: segments,
        external: None,
    })
}

fn segment_score(s: &SegmentStats, cfg: &MetricConfig) -> SegmentScore {
    SegmentScore {
        bleu: bleu::score_from_stats(&s.bleu, cfg.bleu_smoothing),
        chrf: chrf::score_from_stats(&char_only(&s.chrf, cfg.chrf_char_order), cfg.chrf_beta, cfg.chrf_averaging),
        chrfpp: chrf::score_from_stats(&s.chrf, cfg.chrf_beta, cfg.chrf_averaging),
        ter: s.ter.score(),
    }
}

impl MetricReport {
    /// Adds externally computed scores; later values overwrite earlier ones.
    pub fn merge_external(&mut self, values: impl IntoIterator<Item = (String, f64)>) {
        self.external.get_or_insert_with(BTreeMap::new).extend(values);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn report_matches_individual_metrics() {
        let hyps = ["the cat sat on the mat", "ὁ λόγος ἐστὶ καλός."];
        let refs = ["the cat is on the mat", "ὁ λόγος καλός ἐστι."];
        let cfg = MetricConfig::default();
        let r = score(&hyps, &refs, &cfg, true).unwrap();
        assert_eq!(r.bleu, bleu(&hyps, &refs, &cfg).unwrap());
        assert_eq!(r.chrf, chrf(&hyps, &refs, &cfg).unwrap());
        assert_eq!(r.chrfpp, chrfpp(&hyps, &refs, &cfg).unwrap());
        assert_eq!(r.ter, ter(&hyps, &refs, &cfg).unwrap());
        assert_eq!(r.segment_scores.as_ref().map(Vec::len), Some(2));
    }

    #[test]
    fn config_serde_defaults() {
        let c: MetricConfig = serde_json::from_str(r#"{"bleu_tokenizer":"intl"}"#).unwrap();
        assert_eq!(c, MetricConfig { bleu_tokenizer: BleuTokenizer::Intl, ..MetricConfig::default() });
        assert!(serde_json::from_str::<MetricConfig>(r#"{"bleu_order":3}"#).is_err());
        let bad = MetricConfig { chrf_beta: 0.0, ..MetricConfig::default() };
        assert!(score(&["a"], &["a"], &bad, false).is_err());
    }

    #[test]
    fn external_merge() {
        let mut r = score(&["a b c d"], &["a b c d"], &MetricConfig::default(), false).unwrap();
        r.merge_external([("comet".into(), 0.81)]);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"external\":{\"comet\":0.81}"));
    }

    #[test]
    fn appending_can_raise_bleu() {
        let cfg = MetricConfig::default();
        let reference: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
        let reference = reference.join(" ");
        let short: Vec<&str> = reference.split(' ').take(20).collect();
        let short = short.join(" ");
        let longer = format!("{short} ζ");
        assert!(bleu(&[&longer], &[&reference], &cfg).unwrap() > bleu(&[&short], &[&reference], &cfg).unwrap());
        // Without 4-grams the score is 0; one more token makes the smoothed order nonzero.
        assert_eq!(bleu(&["ὁ ὁ ἐστί"], &["ἐστί"], &cfg).unwrap(), 0.0);
        assert!(bleu(&["ὁ ὁ ἐστί ζ"], &["ἐστί"], &cfg).unwrap() > 0.0);
    }

    fn word() -> impl Strategy<Value = String> {
        prop::sample::select(vec!["ὁ", "λόγος", "ἐστί", "καλός", "the", "cat", "mat", ",", ".", "3"]).prop_map(String::from)
    }

    fn sentence(min: usize) -> impl Strategy<Value = String> {
        prop::collection::vec(word(), min..9).prop_map(|w| w.join(" "))
    }

    fn corpus() -> impl Strategy<Value = Vec<(String, String)>> {
        prop::collection::vec((sentence(1), sentence(1)), 1..6)
    }

    fn split(c: &[(String, String)]) -> (Vec<&str>, Vec<&str>) {
        c.iter().map(|(h, r)| (h.as_str(), r.as_str())).unzip()
    }

    proptest! {
        #[test]
        fn ranges(c in corpus()) {
            let (h, r) = split(&c);
            let s = score(&h, &r, &MetricConfig::default(), false).unwrap();
            for v in [s.bleu, s.chrf, s.chrfpp] {
                prop_assert!((0.0..=100.0 + 1e-9).contains(&v));
            }
            prop_assert!(s.ter >= 0.0);
        }

        #[test]
        fn identical_corpora(refs in prop::collection::vec(sentence(4), 1..6)) {
            let r: Vec<&str> = refs.iter().map(String::as_str).collect();
            let s = score(&r, &r, &MetricConfig::default(), false).unwrap();
            prop_assert_eq!((s.bleu, s.chrf, s.chrfpp, s.ter), (100.0, 100.0, 100.0, 0.0));
        }

        #[test]
        fn unmatched_token_degrades(c in corpus()) {
            let cfg = MetricConfig::default();
            let (h, r) = split(&c);
            let worse: Vec<String> = h.iter().map(|s| format!("{s} ζζζζ")).collect();
            let w: Vec<&str> = worse.iter().map(String::as_str).collect();
            let before = score(&h, &r, &cfg, false).unwrap();
            let after = score(&w, &r, &cfg, false).unwrap();
            // BLEU is monotone only once the brevity penalty is inactive and
            // every order already has hypothesis n-grams.
            let tokens = |v: &[&str]| v.iter().map(|s| tokenize_13a(s).len()).sum::<usize>();
            let longest = h.iter().map(|s| tokenize_13a(s).len()).max().unwrap_or(0);
            if tokens(&h) >= tokens(&r) && longest >= cfg.bleu_max_order {
                prop_assert!(after.bleu <= before.bleu + 1e-9);
            }
            prop_assert!(after.chrf <= before.chrf + 1e-9);
            prop_assert!(after.chrfpp <= before.chrfpp + 1e-9);
            prop_assert!(after.ter >= before.ter - 1e-12);
        }
    }
}
