//! Metric tokenizers: mteval-13a, the international (Unicode category) variant,
//! and the Tercom normalizer used by TER.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory as G};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BleuTokenizer {
    #[default]
    #[serde(rename = "13a", alias = "thirteen_a")]
    ThirteenA,
    Intl,
}

impl BleuTokenizer {
    pub fn tokenize(self, text: &str) -> Vec<String> {
        match self {
            BleuTokenizer::ThirteenA => tokenize_13a(text),
            BleuTokenizer::Intl => tokenize_intl(text),
        }
    }
}

/// Whitespace as Python's `str.split()` sees it.
pub(crate) fn is_py_space(c: char) -> bool {
    c.is_whitespace() || ('\u{1c}'..='\u{1f}').contains(&c)
}

pub(crate) fn py_split(text: &str) -> impl Iterator<Item = &str> {
    text.split(is_py_space).filter(|t| !t.is_empty())
}

fn split_owned(text: &str) -> Vec<String> {
    py_split(text).map(String::from).collect()
}

/// Replaces every character matching `pred` by itself padded with spaces.
fn pad_chars(text: &str, pred: impl Fn(char) -> bool) -> String {
    let mut out = String::with_capacity(text.len() * 2);
    for c in text.chars() {
        if pred(c) {
            out.push(' ');
            out.push(c);
            out.push(' ');
        } else {
            out.push(c);
        }
    }
    out
}

/// Left-to-right, non-overlapping rewrite of two-character matches `(x)(y)`
/// into `x y ` or, with `lead`, ` x y`.
fn rewrite_pairs(text: &str, first: impl Fn(char) -> bool, second: impl Fn(char) -> bool, lead: bool) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len() * 2);
    let mut i = 0;
    while i < chars.len() {
        if i + 1 < chars.len() && first(chars[i]) && second(chars[i + 1]) {
            if lead {
                out.push(' ');
            }
            out.push(chars[i]);
            out.push(' ');
            out.push(chars[i + 1]);
            if !lead {
                out.push(' ');
            }
            i += 2;
        } else {
            out.push(chars[i]);
            i += 1;
        }
    }
    out
}

/// ASCII punctuation and symbols that 13a always separates.
fn is_13a_symbol(c: char) -> bool {
    matches!(c, '{'..='~' | '['..='`' | ' '..='&' | '('..='+' | ':'..='@' | '/')
}

/// Splits periods/commas away from non-digits, and dashes after digits.
fn split_western(text: &str) -> String {
    let not_digit = |c: char| !c.is_ascii_digit();
    let dot_comma = |c: char| c == '.' || c == ',';
    let s = rewrite_pairs(text, not_digit, dot_comma, false);
    let s = rewrite_pairs(&s, dot_comma, not_digit, true);
    rewrite_pairs(&s, |c| c.is_ascii_digit(), |c| c == '-', false)
}

fn decode_entities(text: &str) -> String {
    text.replace("&quot;", "\"").replace("&amp;", "&").replace("&lt;", "<").replace("&gt;", ">")
}

/// The mteval-v13a tokenizer.
pub fn tokenize_13a(text: &str) -> Vec<String> {
    let mut line = text.trim_end_matches(is_py_space).replace("<skipped>", "").replace("-\n", "").replace('\n', " ");
    if line.contains('&') {
        line = decode_entities(&line);
    }
    let padded = alloc::format!(" {line} ");
    split_owned(&split_western(&pad_chars(&padded, is_13a_symbol)))
}

fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        G::ConnectorPunctuation
            | G::DashPunctuation
            | G::OpenPunctuation
            | G::ClosePunctuation
            | G::InitialPunctuation
            | G::FinalPunctuation
            | G::OtherPunctuation
    )
}

fn is_symbol(c: char) -> bool {
    matches!(get_general_category(c), G::MathSymbol | G::CurrencySymbol | G::ModifierSymbol | G::OtherSymbol)
}

fn is_number(c: char) -> bool {
    matches!(get_general_category(c), G::DecimalNumber | G::LetterNumber | G::OtherNumber)
}

/// Unicode-category tokenizer: punctuation not touching a number and every
/// symbol become separate tokens.
pub fn tokenize_intl(text: &str) -> Vec<String> {
    let line = text.trim_end_matches(is_py_space);
    let s = rewrite_pairs(line, |c| !is_number(c), is_punctuation, false);
    let s = rewrite_pairs(&s, is_punctuation, |c| !is_number(c), true);
    split_owned(&pad_chars(&s, is_symbol))
}

/// Tercom normalization: lowercasing unless `case_sensitive`, then, when
/// `normalized`, entity decoding and punctuation splitting.
pub fn tokenize_tercom(text: &str, normalized: bool, case_sensitive: bool) -> Vec<String> {
    let text = text.trim_end_matches(is_py_space);
    let mut sent = if case_sensitive { String::from(text) } else { text.to_lowercase() };
    if normalized {
        let line = decode_entities(&sent.replace("\n-", "").replace('\n', " "));
        let padded = alloc::format!(" {line} ");
        let mut s = pad_chars(&padded, is_13a_symbol).replace("'s ", " 's ");
        if s.ends_with("'s") {
            s.truncate(s.len() - 2);
            s.push_str(" 's");
        }
        sent = split_western(&s);
    }
    split_owned(&sent)
}
