mod oracles;

use agmg_core::metrics::ter::segment_edits;
use agmg_core::metrics::{
    bleu, chrf, chrfpp, score, ter, tokenize_13a, tokenize_intl, tokenize_tercom, BleuTokenizer, ChrfAveraging, MetricConfig,
    Smoothing,
};
use oracles::metrics as oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const PAIRS: &str = include_str!("data/metric_pairs.tsv");
const GREEK: &str = include_str!("data/intl_greek.txt");
const REFERENCE: &str = include_str!("data/reference_values.json");

fn fixture() -> (Vec<&'static str>, Vec<&'static str>) {
    PAIRS.lines().map(|l| l.split_once('\t').expect("tab-separated pair")).unzip()
}

fn reference() -> Value {
    serde_json::from_str(REFERENCE).unwrap()
}

fn tokens(v: &Value) -> Vec<Vec<String>> {
    serde_json::from_value(v.clone()).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn tokenizers_match_reference_outputs() {
    let r = reference();
    let greek: Vec<&str> = GREEK.lines().collect();
    let (hyps, refs) = fixture();
    let intl: Vec<Vec<String>> = greek.iter().map(|s| tokenize_intl(s)).collect();
    assert_eq!(intl, tokens(&r["intl_tokens"]));
    let all: Vec<&str> = greek.iter().chain(&hyps).chain(&refs).copied().collect();
    let t13a: Vec<Vec<String>> = all.iter().map(|s| tokenize_13a(s)).collect();
    assert_eq!(t13a, tokens(&r["13a_tokens"]));
    let tercom: Vec<Vec<String>> = hyps.iter().chain(&refs).map(|s| tokenize_tercom(s, true, false)).collect();
    assert_eq!(tercom, tokens(&r["tercom_tokens"]));
}

#[test]
fn corpus_scores_match_reference_values() {
    let r = reference();
    let (h, rf) = fixture();
    let cfg = MetricConfig::default();
    let num = |k: &str| r[k].as_f64().unwrap();
    let cases = [
        ("bleu_13a_exp", bleu(&h, &rf, &cfg).unwrap()),
        ("bleu_13a_none", bleu(&h, &rf, &MetricConfig { bleu_smoothing: Smoothing::None, ..cfg.clone() }).unwrap()),
        ("bleu_intl_exp", bleu(&h, &rf, &MetricConfig { bleu_tokenizer: BleuTokenizer::Intl, ..cfg.clone() }).unwrap()),
        ("chrf", chrf(&h, &rf, &cfg).unwrap()),
        ("chrfpp", chrfpp(&h, &rf, &cfg).unwrap()),
        (
            "chrfpp_per_order_f",
            chrfpp(&h, &rf, &MetricConfig { chrf_averaging: ChrfAveraging::PerOrderF, ..cfg.clone() }).unwrap(),
        ),
        ("ter", ter(&h, &rf, &cfg).unwrap()),
    ];
    for (key, got) in cases {
        assert!(close(got, num(key), 1e-9), "{key}: {got} vs {}", num(key));
    }
    let edits: Vec<usize> = serde_json::from_value(r["ter_segment_edits"].clone()).unwrap();
    for (i, (hy, re)) in h.iter().zip(&rf).enumerate() {
        let got = segment_edits(&tokenize_tercom(hy, true, false), &tokenize_tercom(re, true, false));
        assert_eq!(got, edits[i], "segment {i}");
    }
}

#[test]
fn corpus_scores_match_oracles() {
    let (h, rf) = fixture();
    let cfg = MetricConfig::default();
    let report = score(&h, &rf, &cfg, false).unwrap();
    let segs: Vec<(Vec<String>, Vec<String>)> = h.iter().zip(&rf).map(|(a, b)| (tokenize_13a(a), tokenize_13a(b))).collect();
    assert!(close(report.bleu, oracle::bleu(&segs, 4, true), 1e-4));
    let pairs: Vec<(&str, &str)> = h.iter().copied().zip(rf.iter().copied()).collect();
    assert!(close(report.chrf, oracle::chrf(&pairs, 6, 0, 2.0, false), 1e-4));
    assert!(close(report.chrfpp, oracle::chrf(&pairs, 6, 2, 2.0, false), 1e-4));
    let (mut edits, mut len) = (0, 0);
    for (a, b) in &pairs {
        let (x, y) = (tokenize_tercom(a, true, false), tokenize_tercom(b, true, false));
        edits += oracle::exhaustive_ter_edits(&x, &y);
        len += y.len();
    }
    assert!(close(report.ter, edits as f64 / len as f64, 1e-4), "{} vs {}", report.ter, edits as f64 / len as f64);
}

#[test]
fn worked_examples() {
    let cfg = MetricConfig::default();
    let segs = vec![(tokenize_13a("the cat sat on the mat"), tokenize_13a("the cat is on the mat"))];
    let hand = 100.0 * (1.0f64 / 48.0).powf(0.25);
    assert!(close(oracle::bleu(&segs, 4, true), hand, 1e-12));
    assert!(close(bleu(&["the cat sat on the mat"], &["the cat is on the mat"], &cfg).unwrap(), hand, 1e-12));

    let two = MetricConfig { chrf_char_order: 2, ..cfg.clone() };
    let brute = oracle::chrf(&[("abcd", "abce")], 2, 0, 2.0, false);
    assert!(close(brute, 100.0 * 17.0 / 24.0, 1e-12));
    assert!(close(chrf(&["abcd"], &["abce"], &two).unwrap(), brute, 1e-12));

    let w = |s: &str| s.split(' ').map(String::from).collect::<Vec<_>>();
    assert_eq!(oracle::exhaustive_ter_edits(&w("a b x d e"), &w("a b c d e")), 1);
    assert!(close(ter(&["a b x d e"], &["a b c d e"], &cfg).unwrap(), 0.2, 1e-12));
    assert_eq!(oracle::exhaustive_ter_edits(&w("c d a b e f"), &w("a b c d e f")), 1);
    assert!(close(ter(&["c d a b e f"], &["a b c d e f"], &cfg).unwrap(), 1.0 / 6.0, 1e-12));
}

#[test]
fn greedy_ter_bounds_exhaustive() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let vocab = ["a", "b", "c", "d", "e", "f", "g"];
    let (mut equal, trials) = (0, 500);
    for _ in 0..trials {
        let r: Vec<String> = (0..rng.random_range(1..=7)).map(|_| vocab[rng.random_range(0..vocab.len())].to_string()).collect();
        // Hypotheses are perturbed references: moved blocks, substitutions, drops.
        let mut h = r.clone();
        for _ in 0..rng.random_range(0..3) {
            match rng.random_range(0..3) {
                0 if h.len() > 1 => {
                    let s = rng.random_range(0..h.len());
                    let l = rng.random_range(1..=h.len() - s);
                    let block: Vec<String> = h.drain(s..s + l).collect();
                    let at = rng.random_range(0..=h.len());
                    h.splice(at..at, block);
                }
                1 if !h.is_empty() => {
                    let i = rng.random_range(0..h.len());
                    h[i] = vocab[rng.random_range(0..vocab.len())].to_string();
                }
                _ if h.len() < 7 => h.insert(rng.random_range(0..=h.len()), "z".to_string()),
                _ => {}
            }
        }
        let greedy = segment_edits(&h, &r);
        let best = oracle::exhaustive_ter_edits(&h, &r);
        assert!(greedy >= best, "{h:?} / {r:?}: {greedy} < {best}");
        equal += usize::from(greedy == best);
    }
    assert!(equal * 100 >= trials * 95, "greedy optimal on {equal}/{trials}");
}
