//! Rule-based sentence segmentation for Ancient and Modern Greek.
//!
//! A boundary is placed after a run of terminators (plus any closing quotes
//! or brackets) when the run is followed by whitespace and a plausible
//! sentence start, or by the end of the text. Terminators are `.`, `!`, `…`
//! and the Greek question mark, which NFC turns into ASCII `;`. The ano
//! teleia (`·`) is clause-level and only terminates when enabled.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::Side;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmenterConfig {
    pub ano_teleia_boundary: bool,
    /// Tokens such as `π.χ.` after which a period never ends a sentence.
    pub abbreviations: Vec<String>,
}

pub const DEFAULT_ABBREVIATIONS: [&str; 8] = ["π.χ.", "κ.λπ.", "κ.ά.", "βλ.", "Σ.τ.Μ.", "κ.λ.π.", "δηλ.", "σελ."];

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            ano_teleia_boundary: false,
            abbreviations: DEFAULT_ABBREVIATIONS.into_iter().map(String::from).collect(),
        }
    }
}

impl SegmenterConfig {
    /// Parses an abbreviation list: one entry per line, blank lines and `#` comments ignored.
    pub fn parse_abbreviations(list: &str) -> Vec<String> {
        list.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect()
    }
}

/// A sentence, addressed by character offsets into the segmented text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

fn is_terminator(c: char, cfg: &SegmenterConfig) -> bool {
    match c {
        '.' | '!' | '…' | ';' | '\u{037E}' => true,
        '\u{0387}' | '\u{00B7}' => cfg.ano_teleia_boundary,
        _ => false,
    }
}

fn is_closing(c: char) -> bool {
    matches!(c, '»' | '”' | '"' | '\'' | '’' | ')' | ']' | '}' | '⟩')
}

fn is_opening(c: char) -> bool {
    matches!(c, '«' | '“' | '"' | '‘' | '\'' | '(' | '[' | '—' | '–' | '-')
}

/// Whether `c` may open a sentence on `side`. Modern Greek capitalizes
/// sentence starts; editions of Ancient Greek often do not.
fn is_sentence_start(c: char, side: Side) -> bool {
    if is_opening(c) || c.is_ascii_digit() {
        return true;
    }
    match side {
        Side::Ell => c.is_uppercase(),
        Side::Grc => c.is_alphabetic(),
    }
}

fn ends_with_abbreviation(chars: &[char], run_start: usize, run_end: usize, cfg: &SegmenterConfig) -> bool {
    if cfg.abbreviations.is_empty() || chars[run_start..run_end].iter().any(|&c| c != '.') {
        return false;
    }
    let mut word_start = run_start;
    while word_start > 0 && !chars[word_start - 1].is_whitespace() {
        word_start -= 1;
    }
    let word: String = chars[word_start..run_end].iter().collect();
    let word = word.trim_start_matches(is_opening);
    let lower = word.to_lowercase();
    cfg.abbreviations.iter().any(|abbr| {
        let abbr_lower = abbr.to_lowercase();
        let hit = |w: &str, a: &str| {
            w == a
                || (w.ends_with(a)
                    && w[..w.len() - a.len()]
                        .chars()
                        .next_back()
                        .is_some_and(|c| !c.is_alphabetic()))
        };
        hit(word, abbr) || hit(&lower, &abbr_lower)
    })
}

/// Splits `text` into sentences. Spans never include surrounding whitespace.
pub fn segment(text: &str, side: Side, cfg: &SegmenterConfig) -> Vec<SentenceSpan> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut spans = Vec::new();
    let mut sentence_start: Option<usize> = None;
    let mut i = 0;

    let close = |spans: &mut Vec<SentenceSpan>, start: usize, end: usize| {
        spans.push(SentenceSpan { start, end, text: chars[start..end].iter().collect() });
    };

    while i < n {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = *sentence_start.get_or_insert(i);
        if !is_terminator(c, cfg) {
            i += 1;
            continue;
        }
        let run_start = i;
        while i < n && is_terminator(chars[i], cfg) {
            i += 1;
        }
        let run_end = i;
        while i < n && is_closing(chars[i]) {
            i += 1;
        }
        let end = i;
        let mut next = i;
        while next < n && chars[next].is_whitespace() {
            next += 1;
        }
        let boundary = if next == n {
            true
        } else {
            next > end
                && is_sentence_start(chars[next], side)
                && !ends_with_abbreviation(&chars, run_start, run_end, cfg)
        };
        if boundary {
            close(&mut spans, start, end);
            sentence_start = None;
        }
    }
    if let Some(start) = sentence_start {
        let mut end = n;
        while end > start && chars[end - 1].is_whitespace() {
            end -= 1;
        }
        close(&mut spans, start, end);
    }
    spans
}

/// Sentence texts only.
pub fn segment_texts(text: &str, side: Side, cfg: &SegmenterConfig) -> Vec<String> {
    segment(text, side, cfg).into_iter().map(|s| s.text).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;
    use proptest::prelude::*;

    fn texts(t: &str, side: Side, cfg: &SegmenterConfig) -> Vec<String> {
        segment_texts(t, side, cfg)
    }

    #[test]
    fn question_and_period() {
        let cfg = SegmenterConfig::default();
        assert_eq!(texts("Τίς εἶ; Ἐγώ εἰμι.", Side::Grc, &cfg), vec!["Τίς εἶ;", "Ἐγώ εἰμι."]);
        assert_eq!(texts("Τίς εἶ\u{037E} Ἐγώ εἰμι.", Side::Grc, &cfg).len(), 2);
    }

    #[test]
    fn ano_teleia_toggle() {
        let off = SegmenterConfig::default();
        assert_eq!(texts("ὁ δὲ εἶπεν· ἐγώ.", Side::Grc, &off).len(), 1);
        let on = SegmenterConfig { ano_teleia_boundary: true, ..SegmenterConfig::default() };
        assert_eq!(texts("ὁ δὲ εἶπεν· ἐγώ.", Side::Grc, &on), vec!["ὁ δὲ εἶπεν·", "ἐγώ."]);
        assert_eq!(texts("ὁ δὲ εἶπεν\u{0387} ἐγώ.", Side::Grc, &on).len(), 2);
    }

    #[test]
    fn abbreviation_guard() {
        let cfg = SegmenterConfig::default();
        assert_eq!(texts("π.χ. καὶ ἄλλα.", Side::Ell, &cfg).len(), 1);
        assert_eq!(texts("Ήρθαν φίλοι, π.χ. Ο Νίκος.", Side::Ell, &cfg).len(), 1);
        assert_eq!(texts("Δες (βλ. Εικόνα 2) εδώ.", Side::Ell, &cfg).len(), 1);
        let none = SegmenterConfig { abbreviations: vec![], ..SegmenterConfig::default() };
        assert_eq!(texts("Ήρθαν φίλοι, π.χ. Ο Νίκος.", Side::Ell, &none).len(), 2);
    }

    #[test]
    fn numbers_and_quotes() {
        let cfg = SegmenterConfig::default();
        assert_eq!(texts("Το π είναι 3.14 περίπου. Ναι.", Side::Ell, &cfg).len(), 2);
        assert_eq!(
            texts("Είπε: «Έλα εδώ.» Και ήρθε.", Side::Ell, &cfg),
            vec!["Είπε: «Έλα εδώ.»", "Και ήρθε."]
        );
        assert_eq!(texts("Περίμενε... Τίποτα.", Side::Ell, &cfg), vec!["Περίμενε...", "Τίποτα."]);
        assert_eq!(texts("Ηρθε. και έφυγε.", Side::Ell, &cfg).len(), 1);
        assert_eq!(texts("ἦλθε. καὶ ἀπῆλθε.", Side::Grc, &cfg).len(), 2);
    }

    #[test]
    fn empty_and_whitespace() {
        let cfg = SegmenterConfig::default();
        assert!(segment("", Side::Grc, &cfg).is_empty());
        assert!(segment("   \n ", Side::Grc, &cfg).is_empty());
        let spans = segment("  λόγος  ", Side::Grc, &cfg);
        assert_eq!(spans, vec![SentenceSpan { start: 2, end: 7, text: "λόγος".into() }]);
    }

    #[test]
    fn abbreviation_file_parsing() {
        let list = "# modern\nπ.χ.\n\n  βλ. \n";
        assert_eq!(SegmenterConfig::parse_abbreviations(list), vec!["π.χ.", "βλ."]);
    }

    fn word() -> impl Strategy<Value = String> {
        proptest::string::string_regex("[α-ω]{1,8}").unwrap()
    }

    fn sentence() -> impl Strategy<Value = String> {
        (proptest::string::string_regex("[ΑΒΓΔΕΖΗΘΙΚΛΜΝΞΟΠΡΣΤΥΦΧΨΩ]").unwrap(), proptest::collection::vec(word(), 1..6), "[.;!]")
            .prop_map(|(cap, words, term)| format!("{cap}{}{term}", words.join(" ")))
    }

    fn messy() -> impl Strategy<Value = String> {
        proptest::string::string_regex("[α-ωΑ-Ω .;!·…»«0-9\n\t]{0,60}").unwrap()
    }

    proptest! {
        #[test]
        fn lossless_and_ordered(text in messy(), teleia in any::<bool>()) {
            let cfg = SegmenterConfig { ano_teleia_boundary: teleia, ..SegmenterConfig::default() };
            let chars: Vec<char> = text.chars().collect();
            let spans = segment(&text, Side::Grc, &cfg);
            let mut cursor = 0;
            let mut rebuilt = String::new();
            for s in &spans {
                prop_assert!(s.start < s.end && s.end <= chars.len());
                prop_assert!(s.start >= cursor);
                let gap: String = chars[cursor..s.start].iter().collect();
                prop_assert!(gap.chars().all(char::is_whitespace));
                rebuilt.push_str(&gap);
                let body: String = chars[s.start..s.end].iter().collect();
                prop_assert_eq!(&body, &s.text);
                rebuilt.push_str(&body);
                cursor = s.end;
            }
            let tail: String = chars[cursor..].iter().collect();
            prop_assert!(tail.chars().all(char::is_whitespace));
            rebuilt.push_str(&tail);
            prop_assert_eq!(rebuilt, text);
        }

        #[test]
        fn appending_keeps_earlier_spans(sents in proptest::collection::vec(sentence(), 1..6), extra in sentence()) {
            let cfg = SegmenterConfig::default();
            let base = sents.join(" ");
            let before = segment(&base, Side::Ell, &cfg);
            let after = segment(&format!("{base} {extra}"), Side::Ell, &cfg);
            prop_assert!(after.len() >= before.len());
            prop_assert_eq!(&after[..before.len()], &before[..]);
        }
    }
}
