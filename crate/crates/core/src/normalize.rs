//! Markup stripping, deep cleaning and Unicode normalization for polytonic
//! and monotonic Greek.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use unicode_normalization::char::{canonical_combining_class, is_combining_mark};
use unicode_normalization::UnicodeNormalization;

use crate::model::Side;

/// Counts of what a cleaning pass removed or rewrote.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub removed_markup_spans: usize,
    pub removed_bracket_spans: usize,
    pub removed_page_numbers: usize,
    pub removed_translator_comments: usize,
    pub normalized_codepoints: usize,
}

impl CleaningReport {
    pub fn merge(&mut self, other: &CleaningReport) {
        self.removed_markup_spans += other.removed_markup_spans;
        self.removed_bracket_spans += other.removed_bracket_spans;
        self.removed_page_numbers += other.removed_page_numbers;
        self.removed_translator_comments += other.removed_translator_comments;
        self.normalized_codepoints += other.normalized_codepoints;
    }
}

/// Rule switches for [`deep_clean`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanOptions {
    /// Unwrap editorial brackets instead of dropping them with their content.
    pub keep_bracket_content: bool,
    /// A parenthesised span containing one of these markers is a translator comment.
    pub comment_markers: Vec<String>,
    /// Run [`fold_oxia_to_tonos`] after NFC.
    pub fold_oxia: bool,
}

impl Default for CleanOptions {
    fn default() -> Self {
        CleanOptions {
            keep_bracket_content: false,
            comment_markers: ["Σ.τ.Μ.", "Σ.τ.Ε.", "σ.τ.μ.", "Σημ. μτφρ."]
                .into_iter()
                .map(String::from)
                .collect(),
            fold_oxia: false,
        }
    }
}

/// Removes `<...>` tags and decodes `&amp; &lt; &gt; &quot;`.
pub fn strip_markup(text: &str) -> String {
    strip_markup_counted(text).0
}

/// [`strip_markup`] that also reports how many tags it removed.
pub fn strip_markup_counted(text: &str) -> (String, usize) {
    let mut out = String::with_capacity(text.len());
    let mut removed = 0;
    let mut rest = text;
    while let Some(pos) = rest.find('<') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        match tag_len(tail) {
            Some(len) => {
                removed += 1;
                rest = &tail[len..];
            }
            None => {
                out.push('<');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    (decode_entities(&out), removed)
}

/// Byte length of the tag starting at `s[0] == '<'`, if it is tag syntax.
fn tag_len(s: &str) -> Option<usize> {
    let mut chars = s.char_indices().skip(1);
    let (_, first) = chars.next()?;
    if !(first.is_ascii_alphabetic() || matches!(first, '/' | '!' | '?')) {
        return None;
    }
    for (i, c) in chars {
        match c {
            '>' => return Some(i + 1),
            '<' => return None,
            _ => {}
        }
    }
    None
}

fn decode_entities(s: &str) -> String {
    const ENTITIES: [(&str, char); 4] = [("&amp;", '&'), ("&lt;", '<'), ("&gt;", '>'), ("&quot;", '"')];
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    'outer: while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        for (name, ch) in ENTITIES {
            if let Some(after) = tail.strip_prefix(name) {
                out.push(ch);
                rest = after;
                continue 'outer;
            }
        }
        out.push('&');
        rest = &tail[1..];
    }
    out.push_str(rest);
    out
}

/// Canonical composition (NFC). Precomposed polytonic letters stay polytonic.
pub fn normalize_unicode(text: &str) -> String {
    text.nfc().collect()
}

/// Number of input code points that sit in a combining sequence NFC rewrites.
pub fn count_normalized_codepoints(text: &str) -> usize {
    let mut count = 0;
    let mut segment: Vec<char> = Vec::new();
    let mut flush = |segment: &mut Vec<char>| {
        if !segment.is_empty() && !segment.iter().copied().nfc().eq(segment.iter().copied()) {
            count += segment.len();
        }
        segment.clear();
    };
    for c in text.chars() {
        if canonical_combining_class(c) == 0 && !is_combining_mark(c) {
            flush(&mut segment);
        }
        segment.push(c);
    }
    flush(&mut segment);
    count
}

/// Folds the spacing oxia that NFC leaves as U+00B4 onto the Greek tonos U+0384.
///
/// Combining oxia and tonos already coincide under canonical equivalence.
pub fn fold_oxia_to_tonos(text: &str) -> String {
    text.nfc()
        .map(|c| match c {
            '\u{00B4}' => '\u{0384}',
            other => other,
        })
        .collect()
}

/// Maps a character to its base letter: decompose, drop combining marks, recompose.
///
/// Case is preserved. Characters that do not decompose, or whose stripped
/// form would be empty, map to themselves.
pub fn strip_diacritics(ch: char) -> char {
    let stripped: String = core::iter::once(ch)
        .nfd()
        .filter(|&c| !is_combining_mark(c))
        .nfc()
        .collect();
    let mut chars = stripped.chars();
    match (chars.next(), chars.next()) {
        (Some(base), None) => base,
        _ => ch,
    }
}

/// Curly double quotes become guillemets, dash variants become em dash or hyphen.
pub fn canonicalize_punctuation(text: &str) -> String {
    text.chars().map(canonical_punct).collect()
}

fn canonical_punct(c: char) -> char {
    match c {
        '\u{201C}' | '\u{201E}' => '«',
        '\u{201D}' | '\u{201F}' => '»',
        '\u{2018}' | '\u{201B}' => '\u{2019}',
        '\u{2012}' | '\u{2013}' | '\u{2015}' => '\u{2014}',
        '\u{2010}' | '\u{2011}' => '-',
        other => other,
    }
}

/// Collapses every whitespace run to one space and trims both ends.
pub fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Removes page numbers, translator comments and editorial brackets, then
/// canonicalizes punctuation and whitespace.
///
/// Expects markup to be stripped already. Translator comments are only
/// looked for on the Modern Greek side.
pub fn deep_clean(text: &str, side: Side, opts: &CleanOptions) -> (String, CleaningReport) {
    let mut report = CleaningReport::default();

    let mut kept_lines: Vec<&str> = Vec::new();
    for line in text.split('\n') {
        if is_page_number_line(line) {
            report.removed_page_numbers += 1;
        } else {
            kept_lines.push(line);
        }
    }
    let mut body = kept_lines.join("\n");

    if side == Side::Ell && !opts.comment_markers.is_empty() {
        let (out, n) = remove_translator_comments(&body, &opts.comment_markers);
        body = out;
        report.removed_translator_comments = n;
    }

    let (out, n) = remove_brackets(&body, opts.keep_bracket_content);
    report.removed_bracket_spans = n;

    let out = collapse_whitespace(&canonicalize_punctuation(&out));
    (out, report)
}

/// Full cleaning of one raw text: markup, NFC, optional oxia folding, deep clean.
pub fn clean_text(raw: &str, side: Side, opts: &CleanOptions) -> (String, CleaningReport) {
    let (stripped, markup) = strip_markup_counted(raw);
    let normalized_codepoints = count_normalized_codepoints(&stripped);
    let mut normalized = normalize_unicode(&stripped);
    if opts.fold_oxia {
        normalized = fold_oxia_to_tonos(&normalized);
    }
    let (out, mut report) = deep_clean(&normalized, side, opts);
    report.removed_markup_spans = markup;
    report.normalized_codepoints = normalized_codepoints;
    (out, report)
}

/// A line holding only a short digit run, optionally wrapped in punctuation.
fn is_page_number_line(line: &str) -> bool {
    let core = line
        .trim()
        .trim_matches(|c: char| c.is_whitespace() || is_page_decoration(c));
    !core.is_empty() && core.len() <= 6 && core.bytes().all(|b| b.is_ascii_digit())
}

fn is_page_decoration(c: char) -> bool {
    c.is_ascii_punctuation() || matches!(c, '\u{2013}' | '\u{2014}' | '⟨' | '⟩')
}

fn closer_for(c: char) -> Option<char> {
    match c {
        '[' => Some(']'),
        '⟨' => Some('⟩'),
        '{' => Some('}'),
        _ => None,
    }
}

fn is_closer(c: char) -> bool {
    matches!(c, ']' | '⟩' | '}')
}

/// Matched `(open, close)` char-index pairs; unmatched brackets are literal.
fn matched_brackets(chars: &[char]) -> Vec<(usize, usize)> {
    let mut stack: Vec<(usize, char)> = Vec::new();
    let mut pairs = Vec::new();
    for (i, &c) in chars.iter().enumerate() {
        if let Some(close) = closer_for(c) {
            stack.push((i, close));
        } else if is_closer(c) {
            if let Some(pos) = stack.iter().rposition(|&(_, close)| close == c) {
                let (open, _) = stack[pos];
                stack.truncate(pos);
                pairs.push((open, i));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

fn remove_brackets(text: &str, keep_content: bool) -> (String, usize) {
    let chars: Vec<char> = text.chars().collect();
    let pairs = matched_brackets(&chars);
    if pairs.is_empty() {
        return (String::from(text), 0);
    }
    let mut drop = alloc::vec![false; chars.len()];
    let mut count = 0;
    if keep_content {
        for &(open, close) in &pairs {
            drop[open] = true;
            drop[close] = true;
            count += 1;
        }
    } else {
        let mut covered_until = 0;
        for &(open, close) in &pairs {
            if open < covered_until {
                continue;
            }
            drop[open..=close].iter_mut().for_each(|d| *d = true);
            covered_until = close + 1;
            count += 1;
        }
    }
    let out = chars
        .iter()
        .zip(&drop)
        .filter(|(_, &d)| !d)
        .map(|(&c, _)| c)
        .collect();
    (out, count)
}

fn remove_translator_comments(text: &str, markers: &[String]) -> (String, usize) {
    let mut out = String::with_capacity(text.len());
    let mut removed = 0;
    let mut rest = text;
    while let Some(open) = rest.find('(') {
        let Some(close_rel) = rest[open..].find(')') else {
            break;
        };
        let close = open + close_rel;
        let inner = &rest[open + 1..close];
        out.push_str(&rest[..open]);
        if markers.iter().any(|m| inner.contains(m.as_str())) {
            removed += 1;
        } else {
            out.push_str(&rest[open..=close]);
        }
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    (out, removed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;
    use alloc::string::ToString;
    use proptest::prelude::*;

    #[test]
    fn markup_examples() {
        assert_eq!(strip_markup("<p>λόγος</p>"), "λόγος");
        assert_eq!(strip_markup("a &amp; b"), "a & b");
        assert_eq!(strip_markup("plain"), "plain");
        assert_eq!(strip_markup("&lt;p&gt; is a tag"), "<p> is a tag");
        assert_eq!(strip_markup("a < b and c > d"), "a < b and c > d");
        assert_eq!(strip_markup("&amp;lt;"), "&lt;");
        assert_eq!(strip_markup_counted("<div class=\"x\">α<br/>β</div>"), ("αβ".to_string(), 3));
    }

    #[test]
    fn deep_clean_examples() {
        let opts = CleanOptions::default();
        let (out, rep) = deep_clean("λόγος [sic] ἐστί", Side::Grc, &opts);
        assert_eq!(out, "λόγος ἐστί");
        assert_eq!(rep.removed_bracket_spans, 1);

        let (out, rep) = deep_clean("πρῶτον μέρος.\n142\nδεύτερον μέρος.", Side::Grc, &opts);
        assert_eq!(out, "πρῶτον μέρος. δεύτερον μέρος.");
        assert_eq!(rep.removed_page_numbers, 1);

        let clean = "ὁ ἀνὴρ ἔρχεται.";
        let (out, rep) = deep_clean(clean, Side::Grc, &opts);
        assert_eq!(out, clean);
        assert_eq!(rep, CleaningReport::default());
    }

    #[test]
    fn inline_numbers_are_not_page_numbers() {
        let opts = CleanOptions::default();
        let (out, rep) = deep_clean("ἔτη 142 ἔζησεν\n- 17 -\n", Side::Grc, &opts);
        assert_eq!(out, "ἔτη 142 ἔζησεν");
        assert_eq!(rep.removed_page_numbers, 1);
        assert!(!is_page_number_line("1234567"));
    }

    #[test]
    fn bracket_variants_and_keep_mode() {
        let opts = CleanOptions::default();
        let (out, rep) = deep_clean("α ⟨β⟩ γ {δ [ε]} ζ", Side::Grc, &opts);
        assert_eq!(out, "α γ ζ");
        assert_eq!(rep.removed_bracket_spans, 2);

        let keep = CleanOptions { keep_bracket_content: true, ..CleanOptions::default() };
        let (out, rep) = deep_clean("α ⟨β⟩ γ", Side::Grc, &keep);
        assert_eq!(out, "α β γ");
        assert_eq!(rep.removed_bracket_spans, 1);

        let (out, rep) = deep_clean("α [β γ", Side::Grc, &opts);
        assert_eq!(out, "α [β γ");
        assert_eq!(rep.removed_bracket_spans, 0);
    }

    #[test]
    fn translator_comments_on_modern_side() {
        let opts = CleanOptions::default();
        let text = "Ο Σωκράτης (Σ.τ.Μ. φιλόσοφος) μίλησε (σιγά).";
        let (out, rep) = deep_clean(text, Side::Ell, &opts);
        assert_eq!(out, "Ο Σωκράτης μίλησε (σιγά).");
        assert_eq!(rep.removed_translator_comments, 1);
        let (out, _) = deep_clean(text, Side::Grc, &opts);
        assert_eq!(out, text);
    }

    #[test]
    fn punctuation_is_canonicalized() {
        let (out, _) = deep_clean("“Ναι” – είπε", Side::Ell, &CleanOptions::default());
        assert_eq!(out, "«Ναι» — είπε");
    }

    #[test]
    fn nfc_composes_perispomeni_and_ypogegrammeni() {
        // Oracle: the canonical composition of α + U+0342 + U+0345 is U+1FB7.
        assert_eq!(normalize_unicode("\u{03B1}\u{0342}\u{0345}"), "\u{1FB7}");
        // Canonical ordering: the iota subscript (ccc 240) sorts after the accent (ccc 230).
        assert_eq!(normalize_unicode("\u{03B1}\u{0345}\u{0342}"), "\u{1FB7}");
        assert_eq!(normalize_unicode("abc"), "abc");
        let word = "ᾠδὴν ἀείδω";
        assert_eq!(normalize_unicode(word), word);
    }

    #[test]
    fn oxia_follows_canonical_equivalence() {
        // U+1F71 (alpha with oxia) is canonically equivalent to U+03AC (alpha with tonos).
        assert_eq!(normalize_unicode("\u{1F71}"), "\u{03AC}");
        assert_eq!(fold_oxia_to_tonos("\u{1FFD}"), "\u{0384}");
    }

    #[test]
    fn normalized_codepoint_count() {
        assert_eq!(count_normalized_codepoints("abc"), 0);
        assert_eq!(count_normalized_codepoints("\u{03B1}\u{0342}\u{0345}x"), 3);
        assert_eq!(count_normalized_codepoints("\u{037E}"), 1);
    }

    #[test]
    fn strip_diacritics_examples() {
        assert_eq!(strip_diacritics('ᾷ'), 'α');
        assert_eq!(strip_diacritics('Ἄ'), 'Α');
        assert_eq!(strip_diacritics('x'), 'x');
        assert_eq!(strip_diacritics('ῥ'), 'ρ');
        assert_eq!(strip_diacritics('ϊ'), 'ι');
        assert_eq!(strip_diacritics('\u{0301}'), '\u{0301}');
    }

    /// NFD-then-drop-marks oracle, written against the raw decomposition tables.
    fn oracle_base(c: char) -> Option<char> {
        let mut base = None;
        unicode_normalization::char::decompose_canonical(c, |d| {
            if !is_combining_mark(d) && base.is_none() {
                base = Some(d);
            }
        });
        base
    }

    #[test]
    fn greek_extended_sweep_lands_in_basic_greek() {
        let mut letters = 0;
        for cp in 0x1F00u32..=0x1FFF {
            let Some(c) = char::from_u32(cp) else { continue };
            if !c.is_alphabetic() {
                continue;
            }
            letters += 1;
            let base = strip_diacritics(c);
            assert!(
                ('\u{0370}'..='\u{03FF}').contains(&base),
                "{c:?} (U+{cp:04X}) stripped to {base:?}"
            );
            assert_eq!(Some(base), oracle_base(c), "U+{cp:04X}");
            assert_eq!(strip_diacritics(base), base);
        }
        assert!(letters > 200, "swept {letters} letters");
    }

    #[test]
    fn capital_alpha_with_psili_and_oxia_via_oracle() {
        assert_eq!(oracle_base('Ἄ'), Some('Α'));
    }

    fn greekish() -> impl Strategy<Value = String> {
        proptest::string::string_regex("[α-ωἀ-ᾯ\u{0300}-\u{0345} .,;·\\[\\]{}⟨⟩()“”–0-9\n]{0,40}").unwrap()
    }

    fn non_ws_multiset(s: &str) -> BTreeMap<char, usize> {
        let mut m = BTreeMap::new();
        for c in s.chars().filter(|c| !c.is_whitespace()) {
            *m.entry(c).or_insert(0) += 1;
        }
        m
    }

    proptest! {
        #[test]
        fn nfc_is_idempotent(s in greekish()) {
            let once = normalize_unicode(&s);
            prop_assert_eq!(normalize_unicode(&once), once);
        }

        #[test]
        fn strip_diacritics_is_idempotent(c in any::<char>()) {
            let once = strip_diacritics(c);
            prop_assert_eq!(strip_diacritics(once), once);
        }

        #[test]
        fn deep_clean_adds_no_characters(s in greekish(), keep in any::<bool>()) {
            let opts = CleanOptions { keep_bracket_content: keep, ..CleanOptions::default() };
            let (out, _) = deep_clean(&s, Side::Ell, &opts);
            let available = non_ws_multiset(&canonicalize_punctuation(&s));
            for (c, n) in non_ws_multiset(&out) {
                prop_assert!(available.get(&c).copied().unwrap_or(0) >= n, "{:?} appeared", c);
            }
        }
    }
}
